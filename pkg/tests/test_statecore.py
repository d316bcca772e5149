import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entrans.errors import DimensionMismatch, NotNormalized
from entrans.statecore import (
    apply_local,
    complete_isometry,
    majorizes,
    maximally_entangled,
    overlap,
    partial_trace,
    random_state,
    reduced_density,
    schmidt_decompose,
    state_from_schmidt,
    unitarity_error,
    validate_state,
)
from oracles import dense_partial_trace, kron_state

S8, S2 = np.sqrt(0.8), np.sqrt(0.2)


def test_validate_product_state():
    s = validate_state([[1, 0], [0, 0]], 2, 2)
    assert s.dim_a == s.dim_b == 2


def test_validate_pythagorean():
    validate_state([[0.6, 0], [0, 0.8]])


def test_validate_rejects_unnormalized():
    with pytest.raises(NotNormalized):
        validate_state([[1, 0], [0, 1]])


def test_validate_normalize_flag():
    s = validate_state([[1, 0], [0, 1]], normalize=True)
    assert np.allclose(s.coeffs, np.eye(2) / np.sqrt(2))


def test_validate_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        validate_state([[1, 0]], 2, 2)


def test_validate_rejects_nan():
    with pytest.raises(NotNormalized):
        validate_state([[np.nan, 0], [0, 1]])


def test_schmidt_reorders_diagonal():
    f = schmidt_decompose(validate_state(np.diag([0.6, 0.8])))
    assert np.allclose(f.lambdas, [0.8, 0.6], atol=1e-15)
    # local unitaries are permutations
    assert np.allclose(np.abs(f.left), [[0, 1], [1, 0]])
    assert np.allclose(np.abs(f.right), [[0, 1], [1, 0]])


def test_schmidt_hadamard_like_matches_eigen_oracle():
    c = np.array([[0.5, 0.5], [0.5, -0.5]])
    s = validate_state(c)
    oracle = np.sqrt(np.sort(np.linalg.eigvalsh(c @ c.conj().T))[::-1])
    lam = schmidt_decompose(s).lambdas
    assert np.allclose(lam, oracle, atol=1e-12)
    assert np.allclose(lam, [0.7071067811865476] * 2, atol=1e-12)


def test_schmidt_product_state_rank_one():
    f = schmidt_decompose(validate_state([[1, 0], [0, 0]]))
    assert f.rank == 1
    assert np.allclose(f.lambdas, [1, 0])


def test_schmidt_phase_convention():
    rng = np.random.default_rng(3)
    f = schmidt_decompose(random_state(rng, 3, 4))
    w = f.left.conj().T
    for j in range(w.shape[1]):
        first = w[np.flatnonzero(np.abs(w[:, j]) > 1e-10)[0], j]
        assert abs(first.imag) < 1e-14 and first.real > 0


def test_schmidt_is_deterministic():
    rng = np.random.default_rng(11)
    s = random_state(rng, 4, 3)
    a, b = schmidt_decompose(s), schmidt_decompose(s)
    assert np.array_equal(a.left, b.left) and np.array_equal(a.right, b.right)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_reconstruction_and_unitarity(m, n, seed):
    s = random_state(np.random.default_rng(seed), m, n)
    f = schmidt_decompose(s)
    assert np.max(np.abs(s.coeffs - f.left.conj().T @ f.diagonal() @ f.right)) <= 1e-10
    assert unitarity_error(f.left) <= 1e-10 and unitarity_error(f.right) <= 1e-10
    assert np.all(np.diff(f.lambdas) <= 0)
    assert abs(np.sum(f.lambdas**2) - 1) <= 1e-12


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_spectrum_link(m, n, seed):
    s = random_state(np.random.default_rng(seed), m, n)
    lam2 = schmidt_decompose(s).lambdas ** 2
    k = lam2.size
    ea = np.sort(np.linalg.eigvalsh(reduced_density(s, "A")))[::-1]
    eb = np.sort(np.linalg.eigvalsh(reduced_density(s, "B")))[::-1]
    assert np.allclose(ea[:k], lam2, atol=1e-9)
    assert np.allclose(eb[:k], lam2, atol=1e-9)
    assert np.allclose(ea[k:], 0, atol=1e-9) and np.allclose(eb[k:], 0, atol=1e-9)


def test_reduced_density_examples():
    bell = maximally_entangled(2)
    assert np.allclose(reduced_density(bell, "A"), np.eye(2) / 2)
    s = state_from_schmidt([S8, S2])
    assert np.allclose(reduced_density(s, "A"), np.diag([0.8, 0.2]), atol=1e-15)
    prod = validate_state([[1, 0], [0, 0]])
    assert np.allclose(reduced_density(prod, "A"), np.diag([1, 0]))


def test_reduced_density_is_density_matrix():
    rng = np.random.default_rng(5)
    for side in "AB":
        rho = reduced_density(random_state(rng, 3, 5), side)
        assert np.max(np.abs(rho - rho.conj().T)) <= 1e-12
        assert abs(np.trace(rho) - 1) <= 1e-12
        assert np.linalg.eigvalsh(rho).min() >= -1e-10


def test_partial_trace_bell():
    psi = maximally_entangled(2).vector()
    assert np.allclose(partial_trace(psi, [2, 2], [0]), np.eye(2) / 2)


def test_partial_trace_product_factorizes():
    rng = np.random.default_rng(1)
    a = rng.normal(size=3) + 1j * rng.normal(size=3)
    b = rng.normal(size=2) + 1j * rng.normal(size=2)
    a, b = a / np.linalg.norm(a), b / np.linalg.norm(b)
    psi = np.kron(a, b)
    assert np.allclose(partial_trace(psi, [3, 2], [0]), np.outer(a, a.conj()), atol=1e-14)
    assert np.allclose(partial_trace(psi, [3, 2], [1]), np.outer(b, b.conj()), atol=1e-14)


def test_partial_trace_keep_all_is_projector():
    rng = np.random.default_rng(2)
    psi = random_state(rng, 2, 3).vector()
    assert np.allclose(partial_trace(psi, [2, 3], [0, 1]), np.outer(psi, psi.conj()))


def test_partial_trace_three_party_matches_dense_oracle():
    # sum_k sigma_k |k>_A |k>_B1 |+>_B2 with a lopsided sigma
    sig = np.sqrt([0.7, 0.3])
    plus = np.ones(2) / np.sqrt(2)
    psi = sum(sig[k] * np.kron(np.kron(np.eye(2)[k], np.eye(2)[k]), plus) for k in range(2))
    for keep in ([0, 1], [0, 2], [1], [2], [0]):
        assert np.allclose(partial_trace(psi, [2, 2, 2], keep), dense_partial_trace(psi, [2, 2, 2], keep), atol=1e-14)
    # frozen from the dense oracle: (A, B1) keeps the pure 2-qubit target
    rho = dense_partial_trace(psi, [2, 2, 2], [0, 1])
    assert np.allclose(np.diag(rho).real, [0.7, 0, 0, 0.3])
    assert abs(rho[0, 3] - np.sqrt(0.21)) < 1e-14


def test_partial_trace_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        partial_trace(np.ones(6) / np.sqrt(6), [2, 2], [0])


def test_majorizes_examples():
    assert majorizes([0.5, 0.5], [0.8, 0.2])
    assert not majorizes([0.6, 0.4], [0.5, 0.5])
    assert majorizes([0.3, 0.3, 0.4], [0.3, 0.3, 0.4])


def test_majorizes_pads_and_sorts():
    assert majorizes([0.2, 0.5, 0.3], [1.0])
    assert not majorizes([1.0], [0.5, 0.5])


def test_majorizes_rejects_unnormalized():
    with pytest.raises(NotNormalized):
        majorizes([0.5, 0.6], [1, 0])


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_majorization_preorder(d, seed):
    rng = np.random.default_rng(seed)
    x, y, z = (rng.dirichlet(np.ones(d)) for _ in range(3))
    assert majorizes(x, x)
    assert majorizes(x, np.eye(d)[0])
    assert majorizes(np.full(d, 1 / d), x)
    if majorizes(x, y) and majorizes(y, z):
        assert majorizes(x, z)


def test_overlap_examples():
    bell = maximally_entangled(2)
    assert overlap(bell, bell) == pytest.approx(1)
    a = validate_state([[1, 0], [0, 0]])
    b = validate_state([[0, 0], [0, 1]])
    assert overlap(a, b) == 0
    s = state_from_schmidt([S8, S2], 2, 2)
    # (sum lam_i sigma_i)^2 with sigma uniform
    assert overlap(s, bell) == pytest.approx((S8 + S2) ** 2 / 2, abs=1e-12)
    assert overlap(state_from_schmidt([S8, S2]), bell) == pytest.approx(0.9, abs=1e-12)


def test_overlap_symmetric_and_dimension_checked():
    rng = np.random.default_rng(4)
    a, b = random_state(rng, 2, 3), random_state(rng, 2, 3)
    assert overlap(a, b) == pytest.approx(overlap(b, a), abs=1e-15)
    with pytest.raises(DimensionMismatch):
        overlap(a, random_state(rng, 3, 2))


def test_apply_local_identity():
    s = state_from_schmidt([S8, S2])
    w, out = apply_local(s, np.eye(2), np.eye(2))
    assert w == pytest.approx(1)
    assert np.allclose(out.coeffs, s.coeffs)


def test_apply_local_success_branch_against_direct_product():
    s = state_from_schmidt([S8, S2])
    op = np.diag([0.5, 1.0])
    w, out = apply_local(s, op)
    direct = op @ np.diag([S8, S2])
    assert w == pytest.approx(np.sum(direct**2), abs=1e-15)
    assert w == pytest.approx(0.4, abs=1e-15)
    assert overlap(out, maximally_entangled(2)) == pytest.approx(1, abs=1e-12)


def test_apply_local_zero_operator():
    w, out = apply_local(maximally_entangled(2), np.zeros((2, 2)))
    assert w == 0 and out is None


def test_apply_local_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        apply_local(maximally_entangled(2), np.eye(3))


def test_complete_isometry_keeps_columns():
    cols = np.vstack([np.diag([0.6, 0.8]), np.diag([0.8, 0.6])]).astype(complex)
    u = complete_isometry(cols)
    assert unitarity_error(u) < 1e-14
    assert np.array_equal(u[:, :2], cols)


def test_state_vector_layout_matches_kron():
    rng = np.random.default_rng(8)
    s = random_state(rng, 3, 2)
    assert np.allclose(s.vector(), kron_state(s.coeffs))
