import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entrans.deterministic import (
    BirkhoffTerm,
    all_branches,
    assemble_u1,
    birkhoff_decompose,
    build_povm,
    doubly_stochastic_bridge,
    permutation_matrix,
    plan_deterministic,
    run_deterministic,
    t_transform,
)
from entrans.errors import NotIsometry, NotMajorized, SingularInput
from entrans.statecore import (
    maximally_entangled,
    random_state,
    schmidt_decompose,
    state_from_schmidt,
    unitarity_error,
)
from entrans.verify import random_majorized_pair
from oracles import kron_state

L64 = np.sqrt([0.6, 0.4])
S82 = np.sqrt([0.8, 0.2])


def test_bridge_examples():
    D = doubly_stochastic_bridge([0.6, 0.4], [0.8, 0.2])
    assert np.allclose(D, [[2 / 3, 1 / 3], [1 / 3, 2 / 3]], atol=1e-12)
    assert np.allclose(doubly_stochastic_bridge([0.5, 0.3, 0.2], [0.5, 0.3, 0.2]), np.eye(3))
    assert np.allclose(doubly_stochastic_bridge([0.5, 0.5], [1.0, 0.0]), np.full((2, 2), 0.5))


def test_bridge_rejects_wrong_order():
    with pytest.raises(NotMajorized):
        doubly_stochastic_bridge([0.8, 0.2], [0.6, 0.4])


def test_t_transform_is_mix_of_identity_and_swap():
    t = t_transform(3, 0, 2, 0.25)
    swap = permutation_matrix([2, 1, 0])
    assert np.allclose(t, 0.25 * np.eye(3) + 0.75 * swap) or np.allclose(t, 0.75 * np.eye(3) + 0.25 * swap)


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_bridge_property(d, seed):
    lam, sig = random_majorized_pair(np.random.default_rng(seed), d)
    D = doubly_stochastic_bridge(lam**2, sig**2)
    assert np.max(np.abs(D @ sig**2 - lam**2)) <= 1e-10
    assert np.max(np.abs(D.sum(0) - 1)) <= 1e-10
    assert np.max(np.abs(D.sum(1) - 1)) <= 1e-10
    assert D.min() >= -1e-12


def test_birkhoff_examples():
    (t,) = birkhoff_decompose(np.eye(3))
    assert t.weight == pytest.approx(1) and tuple(t.perm) == (0, 1, 2)
    terms = birkhoff_decompose(np.array([[2 / 3, 1 / 3], [1 / 3, 2 / 3]]))
    assert [(round(t.weight, 12), tuple(t.perm)) for t in terms] == [(round(2 / 3, 12), (0, 1)), (round(1 / 3, 12), (1, 0))]
    half = birkhoff_decompose(np.full((2, 2), 0.5))
    assert sorted(tuple(t.perm) for t in half) == [(0, 1), (1, 0)]
    assert all(t.weight == pytest.approx(0.5) for t in half)


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_birkhoff_reconstruction_and_term_count(d, seed):
    rng = np.random.default_rng(seed)
    w = rng.dirichlet(np.ones(d * d))
    D = sum(wi * np.eye(d)[rng.permutation(d)] for wi in w)
    terms = birkhoff_decompose(D)
    rec = sum(t.weight * t.matrix() for t in terms)
    assert np.max(np.abs(rec - D)) <= 1e-10
    assert len(terms) <= (d - 1) ** 2 + 1
    assert sum(t.weight for t in terms) == pytest.approx(1, abs=1e-10)


def test_build_povm_examples():
    D = doubly_stochastic_bridge([0.6, 0.4], [0.8, 0.2])
    povm = build_povm(L64, S82, birkhoff_decompose(D))
    assert np.allclose(np.diag(povm[0]).real, [0.942809, 0.577350], atol=1e-6)
    assert np.allclose(np.diag(povm[1]).real, [0.333333, 0.816497], atol=1e-6)
    assert np.allclose(sum(a.conj().T @ a for a in povm), np.eye(2), atol=1e-12)
    (one,) = build_povm(S82, S82, [BirkhoffTerm(1.0, (0, 1))])
    assert np.allclose(one, np.eye(2))


def test_build_povm_from_bell():
    plan = plan_deterministic(maximally_entangled(2), state_from_schmidt(S82))
    diags = sorted(tuple(np.round(np.diag(a).real, 6)) for a in plan.povm)
    assert (0.894427, 0.447214) in diags
    assert np.allclose(plan.branch_probs, [0.5, 0.5], atol=1e-12)


def test_build_povm_singular_input():
    with pytest.raises(SingularInput):
        build_povm([1.0, 0.0], np.sqrt([0.5, 0.5]), [BirkhoffTerm(0.5, (0, 1)), BirkhoffTerm(0.5, (1, 0))])


def test_assemble_u1_examples():
    assert np.allclose(assemble_u1([np.eye(2)]), np.eye(2))
    plan = plan_deterministic(state_from_schmidt(L64), state_from_schmidt(S82))
    u1 = plan.u1
    assert u1.shape == (4, 4) and unitarity_error(u1) <= 1e-10
    assert np.allclose(u1[:, :2], np.vstack(plan.povm), atol=1e-14)
    with pytest.raises(NotIsometry):
        assemble_u1([np.eye(2) / 2, np.eye(2) / 2])


def test_plan_example_and_bits():
    plan = plan_deterministic(state_from_schmidt(L64), state_from_schmidt(S82))
    assert np.allclose(plan.branch_probs, [2 / 3, 1 / 3], atol=1e-10)
    assert plan.classical_bits == 1
    assert len(set(plan.bob_corrections)) == 2
    same = plan_deterministic(state_from_schmidt(S82), state_from_schmidt(S82))
    assert same.classical_bits == 0 and len(same.terms) == 1


def test_plan_rejects_non_majorized():
    with pytest.raises(NotMajorized):
        plan_deterministic(state_from_schmidt(S82), state_from_schmidt(L64))


def test_run_examples():
    s, t = state_from_schmidt(L64), state_from_schmidt(S82)
    seen = set()
    for seed in range(40):
        trace = run_deterministic(s, t, seed)
        assert trace.branch in (0, 1) and trace.classical_bits == 1
        assert trace.final_overlap == pytest.approx(1, abs=1e-9)
        seen.add(trace.branch)
    assert seen == {0, 1}
    same = run_deterministic(t, t, 3)
    assert same.branch == 0 and same.classical_bits == 0
    bell = run_deterministic(maximally_entangled(2), t, 5)
    assert np.allclose(bell.branch_probs, [0.5, 0.5], atol=1e-10)
    assert bell.final_overlap == pytest.approx(1, abs=1e-9)


def test_run_is_reproducible():
    s, t = state_from_schmidt(L64), state_from_schmidt(S82)
    assert run_deterministic(s, t, 17).branch == run_deterministic(s, t, 17).branch


def _dense_branches(plan):
    """Apply U1 (x) I to the padded state vector and project onto each block."""
    lam = plan.lambdas
    r, k = lam.size, len(plan.terms)
    big = np.zeros((k * r, r), dtype=complex)
    big[:r] = np.diag(lam)
    psi = np.kron(plan.u1, np.eye(r)) @ kron_state(big)
    out = []
    for i in range(k):
        proj = np.zeros(k * r)
        proj[i * r : (i + 1) * r] = 1
        branch = np.kron(np.diag(proj), np.eye(r)) @ psi
        out.append(branch.reshape(k * r, r)[i * r : (i + 1) * r])
    return out


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_every_branch_reaches_target(d, seed):
    rng = np.random.default_rng(seed)
    lam, sig = random_majorized_pair(rng, d)
    s, t = state_from_schmidt(lam), state_from_schmidt(sig)
    plan = plan_deterministic(s, t)
    branches = all_branches(s, t, plan)
    assert min(b.overlap for b in branches) >= 1 - 1e-9
    assert np.allclose([b.probability for b in branches], [tm.weight for tm in plan.terms], atol=1e-10)
    # dense oracle: every branch block has the target's Schmidt coefficients
    # and its reduced state has spectrum p_i * sigma^2
    for blk, tm in zip(_dense_branches(plan), plan.terms):
        w = np.sum(np.abs(blk) ** 2)
        assert w == pytest.approx(tm.weight, abs=1e-10)
        sv = np.linalg.svd(blk / np.sqrt(w), compute_uv=False)
        assert np.allclose(sv, sig, atol=1e-9)
        eig = np.sort(np.linalg.eigvalsh(blk @ blk.conj().T))[::-1]
        assert np.allclose(eig, tm.weight * sig**2, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_communication_is_necessary(d, seed):
    lam, sig = random_majorized_pair(np.random.default_rng(seed), d)
    s, t = state_from_schmidt(lam), state_from_schmidt(sig)
    plan = plan_deterministic(s, t)
    assert len(set(plan.bob_corrections)) >= 2
    blind = all_branches(s, t, plan, bob_corrects=False)
    assert min(b.overlap for b in blind) < 1 - 1e-6


def test_random_bases():
    rng = np.random.default_rng(40)
    for _ in range(10):
        s = random_state(rng, 3, 3)
        lam = schmidt_decompose(s).lambdas
        # a target majorizing the input: concentrate weight onto the first level
        sig_sq = np.sort(lam**2)[::-1].copy()
        sig_sq[0] += sig_sq[-1] * 0.5
        sig_sq[-1] *= 0.5
        t = random_state(rng, 3, 3)
        f = schmidt_decompose(t)
        t = type(t)(f.left.conj().T @ np.diag(np.sqrt(sig_sq)) @ f.right)
        for b in all_branches(s, t):
            assert b.overlap >= 1 - 1e-9
