"""Deterministic single-copy transformation with one-way communication.

When the input's squared Schmidt vector is majorized by the target's, a
doubly stochastic ``D`` with ``lam^2 = D sigma^2`` exists.  Writing ``D`` as a
convex combination of permutations gives a POVM on Alice's side whose every
outcome yields the target up to a permutation of both parties' Schmidt
bases.  Alice undoes her half locally; Bob needs the outcome index to undo
his, which is the classical message.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import montecarlo
from .errors import NotMajorized, NumericalFailure, SingularInput
from .singlecopy import _spectra
from .statecore import (
    BipartiteState,
    _frozen,
    complete_isometry,
    diag_matrix,
    majorizes,
    overlap,
    schmidt_decompose,
)

ZERO_TOL = 1e-12


@dataclass(frozen=True)
class BirkhoffTerm:
    """Weight and permutation; ``perm[i]`` is the column matched to row ``i``."""

    weight: float
    perm: tuple[int, ...]

    def matrix(self) -> np.ndarray:
        return permutation_matrix(self.perm)


def permutation_matrix(perm) -> np.ndarray:
    d = len(perm)
    p = np.zeros((d, d))
    p[np.arange(d), list(perm)] = 1.0
    return p


def t_transform(d: int, j: int, k: int, t: float) -> np.ndarray:
    """t * I + (1 - t) * (transposition of j and k)."""
    m = np.eye(d)
    m[[j, k], [j, k]] = t
    m[j, k] = m[k, j] = 1.0 - t
    return m


def doubly_stochastic_bridge(lam_sq, sig_sq, tol: float = 1e-10) -> np.ndarray:
    """Doubly stochastic D with ``lam_sq = D @ sig_sq`` (both sorted descending).

    Built as a chain of at most d - 1 T-transforms, each equalizing one more
    coordinate of the running vector with ``lam_sq``.
    """
    x = np.sort(np.asarray(lam_sq, dtype=float))[::-1]
    y = np.sort(np.asarray(sig_sq, dtype=float))[::-1]
    d = max(x.size, y.size)
    x = np.pad(x, (0, d - x.size))
    y = np.pad(y, (0, d - y.size))
    if not majorizes(x, y, tol, norm_tol=max(tol, 1e-12)):
        raise NotMajorized("input spectrum is not majorized by the target spectrum")
    D = np.eye(d)
    y = y.copy()
    for _ in range(d):
        diff = y - x
        if np.all(np.abs(diff) <= tol):
            break
        # largest j with y_j > x_j, then the first k > j with y_k < x_k
        j = int(np.flatnonzero(diff > tol)[-1])
        later = np.flatnonzero(diff[j + 1 :] < -tol)
        if later.size == 0:
            raise NumericalFailure("T-transform chain stalled")
        k = j + 1 + int(later[0])
        delta = min(y[j] - x[j], x[k] - y[k])
        t = 1.0 - delta / (y[j] - y[k])
        T = t_transform(d, j, k, t)
        y = T @ y
        if y[j] - x[j] <= x[k] - y[k]:
            y[j] = x[j]
        else:
            y[k] = x[k]
        D = T @ D
    return D


def _caratheodory(terms: list[BirkhoffTerm], d: int) -> list[BirkhoffTerm]:
    """Drop terms until at most (d-1)^2 + 1 remain, keeping the weighted sum fixed."""
    limit = (d - 1) ** 2 + 1
    terms = list(terms)
    while len(terms) > limit:
        vecs = np.array([t.matrix().ravel() for t in terms], dtype=float).T
        system = np.vstack([vecs, np.ones(len(terms))])
        _, _, vh = np.linalg.svd(system)
        c = vh[-1]
        w = np.array([t.weight for t in terms])
        pos = c > 1e-12
        if not pos.any():
            c = -c
            pos = c > 1e-12
        step = np.min(w[pos] / c[pos])
        w = w - step * c
        terms = [BirkhoffTerm(float(wi), t.perm) for wi, t in zip(w, terms) if wi > ZERO_TOL]
    return terms


def birkhoff_decompose(D, tol: float = ZERO_TOL) -> list[BirkhoffTerm]:
    """Greedy Birkhoff-von Neumann decomposition, largest weights first."""
    R = np.array(D, dtype=float)
    d = R.shape[0]
    if R.shape != (d, d):
        raise ValueError(f"D must be square, got {R.shape}")
    terms: list[BirkhoffTerm] = []
    for _ in range(d * d):
        R[R <= tol] = 0.0
        if not np.any(R > 0):
            break
        # Perfect matching on positive entries; among those prefer large entries.
        cost = np.where(R > 0, -R, d + 1.0)
        rows, cols = linear_sum_assignment(cost)
        if np.any(R[rows, cols] <= 0):
            raise NumericalFailure("no perfect matching on the positive entries; D is not doubly stochastic")
        w = float(R[rows, cols].min())
        terms.append(BirkhoffTerm(w, tuple(int(c) for c in cols)))
        R[rows, cols] -= w
    residual = float(np.abs(R).sum())
    if residual > 1e-9:
        raise NumericalFailure(f"decomposition left residual mass {residual:.3g}")
    terms = _caratheodory(terms, d)
    return sorted(terms, key=lambda t: -t.weight)


def build_povm(lam, sigma, terms: list[BirkhoffTerm], tol: float = 1e-10) -> list[np.ndarray]:
    """Diagonal POVM elements ``A_i`` with ``A_i @ Lambda_d = sqrt(p_i) P_i Sigma_d P_i^T``.

    ``P_i`` is the i-th Birkhoff permutation, so the i-th outcome leaves the
    target with both parties' Schmidt bases permuted by ``P_i``.
    """
    lam, sigma = _spectra(lam, sigma)
    d = lam.size
    out = []
    for term in terms:
        permuted = sigma[list(term.perm)] ** 2
        need = term.weight * permuted
        a = np.zeros(d)
        live = lam > tol
        if np.any(need[~live] > tol):
            raise SingularInput("input has a zero Schmidt coefficient where a branch needs weight")
        a[live] = np.sqrt(need[live] / lam[live] ** 2)
        # Off the input's support any completion works; spread it evenly.
        a[~live] = np.sqrt(term.weight)
        out.append(np.diag(a).astype(complex))
    return out


def assemble_u1(povm: list[np.ndarray]) -> np.ndarray:
    """Unitary on Alice's n-fold extended space whose first M columns stack the A_i."""
    return complete_isometry(np.vstack(povm))


@dataclass(frozen=True, eq=False)
class DeterministicPlan:
    lambdas: np.ndarray
    sigmas: np.ndarray
    bridge: np.ndarray
    terms: tuple[BirkhoffTerm, ...]
    povm: tuple[np.ndarray, ...]
    u1: np.ndarray
    branch_probs: tuple[float, ...]

    @property
    def bob_corrections(self) -> tuple[tuple[int, ...], ...]:
        """Inverse permutation Bob applies to his Schmidt basis after each outcome."""
        return tuple(tuple(int(i) for i in np.argsort(t.perm)) for t in self.terms)

    @property
    def classical_bits(self) -> int:
        n = len(self.terms)
        return 0 if n <= 1 else math.ceil(math.log2(n))


def plan_deterministic(state: BipartiteState, target: BipartiteState, tol: float = 1e-10) -> DeterministicPlan:
    fin = schmidt_decompose(state)
    ftg = schmidt_decompose(target)
    lam = np.asarray(fin.lambdas)
    sig = np.asarray(ftg.lambdas)
    if sig.size > lam.size:
        if np.any(sig[lam.size :] > tol):
            raise NotMajorized("target Schmidt rank exceeds the input's")
        sig = sig[: lam.size]
    sig = np.pad(sig, (0, lam.size - sig.size))
    lam_sq, sig_sq = lam**2, sig**2
    if not majorizes(lam_sq, sig_sq, tol, norm_tol=1e-10):
        raise NotMajorized("input spectrum is not majorized by the target spectrum")
    D = doubly_stochastic_bridge(lam_sq, sig_sq, tol)
    terms = birkhoff_decompose(D)
    povm = build_povm(lam, sig, terms)
    u1 = assemble_u1(povm)
    lam_d = diag_matrix(lam, len(lam), len(lam))
    probs = tuple(float(np.sum(np.abs(a @ lam_d) ** 2)) for a in povm)
    for p, term in zip(probs, terms):
        if abs(p - term.weight) > 1e-10:
            raise NumericalFailure(f"branch probability {p!r} differs from Birkhoff weight {term.weight!r}")
    return DeterministicPlan(
        lambdas=_frozen(lam),
        sigmas=_frozen(sig),
        bridge=_frozen(D),
        terms=tuple(terms),
        povm=tuple(_frozen(a) for a in povm),
        u1=_frozen(u1),
        branch_probs=probs,
    )


@dataclass(frozen=True, eq=False)
class BranchResult:
    index: int
    probability: float
    state: BipartiteState
    overlap: float


@dataclass(frozen=True, eq=False)
class ProtocolTrace:
    branch: int
    classical_bits: int
    bob_applied: tuple[int, ...]
    final_state: BipartiteState
    final_overlap: float
    branch_probs: tuple[float, ...]


def _embed_perm(perm, dim: int) -> np.ndarray:
    p = np.eye(dim)
    d = len(perm)
    p[:d, :d] = permutation_matrix(perm)
    return p


def all_branches(
    state: BipartiteState,
    target: BipartiteState,
    plan: DeterministicPlan | None = None,
    *,
    bob_corrects: bool = True,
) -> list[BranchResult]:
    """Evolve every outcome of Alice's POVM and compare with the target.

    Alice's measurement is simulated on her extended space through ``U1``;
    with ``bob_corrects=False`` Bob skips his permutation, which is what he
    would have to do without hearing from Alice.
    """
    plan = plan_deterministic(state, target) if plan is None else plan
    fin = schmidt_decompose(state)
    ftg = schmidt_decompose(target)
    n = fin.shape[1]
    r = plan.lambdas.size
    # Alice and Bob rotate into the input's Schmidt bases (local unitaries).
    c = fin.left @ state.coeffs @ fin.right.conj().T
    # U1 acts on the r-dim Schmidt support; any extra rows of Alice carry zeros.
    k = len(plan.terms)
    extended = np.zeros((k * r, n), dtype=complex)
    extended[:r] = c[:r]
    out = plan.u1 @ extended
    mt, nt = ftg.shape
    results = []
    for i, term in enumerate(plan.terms):
        block = out[i * r : (i + 1) * r]
        w = float(np.sum(np.abs(block) ** 2))
        inv = np.argsort(term.perm)
        # Alice undoes her permutation; Bob undoes his when told the outcome.
        alice = permutation_matrix(inv)
        bob = _embed_perm(inv, n) if bob_corrects else np.eye(n)
        fixed = alice @ block @ bob.T / np.sqrt(w)
        local = np.zeros((mt, nt), dtype=complex)
        kk = min(r, mt, nt)
        local[:kk, :kk] = fixed[:kk, :kk]
        if np.sum(np.abs(local) ** 2) < 1 - 1e-9:
            # Weight outside the target's support: the branch cannot match it.
            final = BipartiteState(_frozen(fixed / np.linalg.norm(fixed)))
            results.append(BranchResult(i, w, final, 0.0))
            continue
        final = BipartiteState(_frozen(ftg.left.conj().T @ local @ ftg.right))
        results.append(BranchResult(i, w, final, overlap(final, target)))
    return results


def run_deterministic(
    state: BipartiteState, target: BipartiteState, seed: int = 0, plan: DeterministicPlan | None = None
) -> ProtocolTrace:
    """Sample Alice's outcome by the Born rule and finish the protocol on that branch."""
    plan = plan_deterministic(state, target) if plan is None else plan
    branches = all_branches(state, target, plan)
    weights = [b.probability for b in branches]
    u = montecarlo.trial_uniforms(seed, 0, 1)[0]
    i = montecarlo.sample_outcome(weights, u)
    chosen = branches[i]
    return ProtocolTrace(
        branch=i,
        classical_bits=plan.classical_bits,
        bob_applied=plan.bob_corrections[i],
        final_state=chosen.state,
        final_overlap=chosen.overlap,
        branch_probs=tuple(weights),
    )
