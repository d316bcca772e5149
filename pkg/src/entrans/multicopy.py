"""Deterministic transformation from n identical copies.

Each copy is pushed by Alice's dilated contraction into the target with an
unnormalized amplitude ``sqrt(p_i)`` (no final projection).  With Bob's
particles identical, the collected state has coefficient matrix
``(sqrt(p_1) Delta; ...; sqrt(p_n) Delta)`` and Alice's unitary ``U2^dag``
folds it into a single block: the target, with certainty.

Bob's side is modelled as the labelled tensor space of his n particles,
dimension N^n, capped at :data:`MAX_BOB_DIM`.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    DimensionOverflow,
    InfeasibleDistribution,
    InfeasibleTarget,
    NotNormalized,
)
from .singlecopy import Contraction, _spectra, contraction_for, optimal_probability
from .statecore import (
    BipartiteState,
    _frozen,
    complete_isometry,
    partial_trace,
    schmidt_decompose,
)

MAX_BOB_DIM = 4096
PROB_TOL = 1e-12


def _ceil_rel(x: float, rel: float = PROB_TOL) -> int:
    """Ceiling that forgives ``x`` overshooting an integer by a relative ``rel``."""
    n = math.ceil(x)
    if n > 1 and x <= (n - 1) * (1 + rel):
        return n - 1
    return max(n, 1)


def min_copies(lam, sigma) -> int:
    """Smallest copy number: [max_k sigma_k^2/lambda_k^2] + 1, [x] the greatest integer below x.

    That is ``ceil(1 / p_opt)``; ratios within rounding of an integer count as
    that integer.
    """
    p = optimal_probability(lam, sigma)
    if p == 0.0:
        raise InfeasibleTarget("optimal single-copy probability is zero")
    lam, sigma = _spectra(lam, sigma)
    support = sigma > 1e-10
    worst = float(np.max(sigma[support] ** 2 / lam[support] ** 2))
    return _ceil_rel(max(worst, 1.0))


class Yield(enum.Enum):
    CERTAIN = 1
    IMPOSSIBLE = 0
    BOUNDARY = "boundary"


def feasible_yield(lam, sigma, n: int, k) -> Yield:
    """Whether n copies give n*k targets with probability 1 (k < 1/n_min) or 0 (k > 1/n_min)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    k = Fraction(k)
    if k <= 0:
        raise ValueError("yield fraction must be positive")
    threshold = Fraction(1, min_copies(lam, sigma))
    if k < threshold:
        return Yield.CERTAIN
    if k > threshold:
        return Yield.IMPOSSIBLE
    return Yield.BOUNDARY


def plan_distribution(n: int, p_opt: float, probs: Sequence[float] | None = None) -> tuple[float, ...]:
    """Branch probabilities summing to one, each at most ``p_opt``.

    Default is the equal split; a custom ``probs`` is validated and its last
    entry adjusted to close the sum.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if n * p_opt < 1 - PROB_TOL:
        raise InfeasibleDistribution(f"{n} copies cannot reach certainty with p_opt={p_opt!r}")
    if probs is None:
        out = [1.0 / n] * n
    else:
        out = [float(p) for p in probs]
        if len(out) != n or any(p < 0 for p in out) or abs(sum(out) - 1) > 1e-9:
            raise NotNormalized(f"custom distribution {out} is not a length-{n} probability vector")
    out[-1] = 1.0 - math.fsum(out[:-1])
    if any(p > p_opt + PROB_TOL for p in out):
        raise InfeasibleDistribution(f"branch probability above p_opt={p_opt!r}")
    return tuple(out)


def build_delta(sigma, n: int, dim_a: int, dim_b: int) -> np.ndarray:
    """Alice x (Bob^n) coefficient matrix: row k is sigma_k |k>_{B1} |+>^{n-1}, flattened."""
    sigma = np.asarray(sigma, dtype=float)
    bob = dim_b**n
    if bob > MAX_BOB_DIM:
        raise DimensionOverflow(f"N^n = {bob} exceeds the cap {MAX_BOB_DIM}")
    band = dim_b ** (n - 1)
    delta = np.zeros((dim_a, bob), dtype=complex)
    for k, s in enumerate(sigma[: min(dim_a, dim_b)]):
        delta[k, k * band : (k + 1) * band] = s / math.sqrt(band)
    return delta


def build_omega(sigma, probs: Sequence[float], dim_a: int, dim_b: int) -> tuple[np.ndarray, np.ndarray]:
    """(Delta, Lambda(Omega)) with Lambda(Omega) the stacked sqrt(p_i) Delta."""
    delta = build_delta(sigma, len(probs), dim_a, dim_b)
    omega = np.vstack([math.sqrt(p) * delta for p in probs])
    return delta, omega


def assemble_u2(probs: Sequence[float], dim_a: int) -> np.ndarray:
    """Unitary whose first ``dim_a`` columns are (sqrt(p_1) I; ...; sqrt(p_n) I)."""
    p = np.asarray(probs, dtype=float)
    if np.any(p < 0) or abs(p.sum() - 1) > 1e-10:
        raise NotNormalized(f"probabilities {p} do not sum to 1")
    q = complete_isometry(np.sqrt(p).reshape(-1, 1).astype(complex))
    return np.kron(q, np.eye(dim_a))


@dataclass(frozen=True, eq=False)
class MultiCopyPlan:
    copies: int
    lambdas: np.ndarray
    sigmas: np.ndarray
    p_opt: float
    n_min: int
    branch_probs: tuple[float, ...]
    contractions: tuple[Contraction, ...]
    delta: np.ndarray
    omega: np.ndarray
    u2: np.ndarray
    dim_a: int
    dim_b: int

    @property
    def classical_bits(self) -> int:
        # Only "done" is ever sent, and not even that when nothing needs doing.
        return 0 if self.copies == 1 else 1


def plan_multicopy(
    state: BipartiteState,
    target: BipartiteState,
    copies: int | None = None,
    probs: Sequence[float] | None = None,
) -> MultiCopyPlan:
    fin = schmidt_decompose(state)
    ftg = schmidt_decompose(target)
    if ftg.shape != fin.shape:
        raise DimensionMismatch(f"input {fin.shape} and target {ftg.shape} dimensions differ")
    lam = np.asarray(fin.lambdas)
    sig = np.asarray(ftg.lambdas)
    p_opt = optimal_probability(lam, sig)
    n_min = min_copies(lam, sig)
    n = n_min if copies is None else int(copies)
    dist = plan_distribution(n, p_opt, probs)
    # Each copy runs the single-copy scheme at its own branch probability.
    contractions = tuple(contraction_for(lam, sig, min(p, p_opt)) for p in dist)
    dim_a, dim_b = fin.shape
    delta, omega = build_omega(sig, dist, dim_a, dim_b)
    return MultiCopyPlan(
        copies=n,
        lambdas=_frozen(lam),
        sigmas=_frozen(sig),
        p_opt=p_opt,
        n_min=n_min,
        branch_probs=dist,
        contractions=contractions,
        delta=_frozen(delta),
        omega=_frozen(omega),
        u2=_frozen(assemble_u2(dist, dim_a)),
        dim_a=dim_a,
        dim_b=dim_b,
    )


@dataclass(frozen=True, eq=False)
class MultiCopyResult:
    rho_a_out: np.ndarray
    block_weights: tuple[float, ...]
    projected: np.ndarray
    pair_marginals: tuple[np.ndarray, ...]
    symmetric_pair_marginals: tuple[np.ndarray, ...]


def slot_permutation(dim_b: int, n: int, order: Sequence[int]) -> np.ndarray:
    """Column permutation of Bob's labelled space that relabels particle slots.

    The returned index array ``idx`` satisfies ``(M @ V)[:, j] == M[:, idx[j]]``
    for the permutation matrix V that moves slot ``order[s]`` into slot ``s``.
    """
    if sorted(order) != list(range(n)):
        raise DimensionMismatch(f"{order} is not a permutation of {n} slots")
    idx = np.arange(dim_b**n).reshape((dim_b,) * n)
    return np.transpose(idx, order).reshape(-1)


def symmetrize(psi_rows: np.ndarray, dim_b: int, n: int) -> np.ndarray:
    """Average a coefficient matrix over all relabellings of Bob's slots, renormalized."""
    acc = np.zeros_like(psi_rows)
    for order in itertools.permutations(range(n)):
        acc += psi_rows[:, slot_permutation(dim_b, n, order)]
    norm = np.linalg.norm(acc)
    if norm < 1e-14:
        raise DimensionMismatch("symmetrized state vanishes")
    return acc / norm


def _pair_marginals(coeffs: np.ndarray, dim_a: int, dim_b: int, n: int) -> tuple[np.ndarray, ...]:
    dims = [dim_a] + [dim_b] * n
    psi = coeffs.reshape(-1)
    return tuple(partial_trace(psi, dims, [0, j]) for j in range(1, n + 1))


def finalize_multicopy(plan: MultiCopyPlan) -> MultiCopyResult:
    """Apply U2^dag on Alice's side and inspect the folded state."""
    rho = plan.omega @ plan.omega.conj().T
    rho_out = plan.u2.conj().T @ rho @ plan.u2
    folded = plan.u2.conj().T @ plan.omega
    m, n = plan.dim_a, plan.copies
    weights = tuple(
        float(np.real(np.trace(rho_out[i * m : (i + 1) * m, i * m : (i + 1) * m]))) for i in range(n)
    )
    projected = folded[:m] / math.sqrt(weights[0])
    sym = symmetrize(projected, plan.dim_b, n) if n > 1 else projected
    return MultiCopyResult(
        rho_a_out=_frozen(rho_out),
        block_weights=weights,
        projected=_frozen(projected),
        pair_marginals=_pair_marginals(projected, m, plan.dim_b, n),
        symmetric_pair_marginals=_pair_marginals(sym, m, plan.dim_b, n),
    )


def target_block(plan: MultiCopyPlan) -> np.ndarray:
    """block-diag(Sigma_d Sigma_d^dag, 0, ..., 0) on Alice's extended space."""
    m = plan.dim_a
    out = np.zeros((plan.copies * m, plan.copies * m), dtype=complex)
    k = plan.sigmas.size
    out[np.arange(k), np.arange(k)] = plan.sigmas**2
    return out


@dataclass(frozen=True, eq=False)
class SpectrumReport:
    eigenvalues: np.ndarray
    target: np.ndarray
    deviation: float


def distinguishable_omega(
    sigma, probs: Sequence[float], perms: Sequence[Sequence[int]], dim_a: int, dim_b: int
) -> SpectrumReport:
    """Spectrum of rho_A when branch i carries Delta V_i (Bob's particles labelled).

    ``perms[i]`` is a column index permutation of Bob's N^n space.
    """
    n = len(probs)
    if len(perms) != n:
        raise DimensionMismatch(f"{len(perms)} permutations for {n} branches")
    delta = build_delta(sigma, n, dim_a, dim_b)
    rows = []
    for p, perm in zip(probs, perms):
        perm = np.asarray(perm)
        if sorted(perm.tolist()) != list(range(delta.shape[1])):
            raise DimensionMismatch("each V_i must permute all N^n basis labels")
        rows.append(math.sqrt(p) * delta[:, perm])
    lam = np.vstack(rows)
    ev = np.sort(np.linalg.eigvalsh(lam @ lam.conj().T))[::-1]
    tgt = np.zeros(n * dim_a)
    s = np.sort(np.asarray(sigma, dtype=float))[::-1] ** 2
    tgt[: s.size] = s
    return SpectrumReport(eigenvalues=ev, target=tgt, deviation=float(np.max(np.abs(ev - tgt))))
