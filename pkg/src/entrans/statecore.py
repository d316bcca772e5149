"""Bipartite pure states as coefficient matrices.

A state ``sum_ij c[i, j] |i>_A |j>_B`` is stored as its M x N coefficient
matrix ``c``.  Local operators act by matrix multiplication: Alice's ``A``
and Bob's ``B`` send ``c`` to ``A @ c @ B.T``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, NotIsometry, NotNormalized, NumericalFailure

NORM_TOL = 1e-12
UNITARY_TOL = 1e-10
SPECTRUM_TOL = 1e-9


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class BipartiteState:
    """Normalized pure state of Alice (dimension M) and Bob (dimension N)."""

    coeffs: np.ndarray

    @property
    def dim_a(self) -> int:
        return self.coeffs.shape[0]

    @property
    def dim_b(self) -> int:
        return self.coeffs.shape[1]

    def vector(self) -> np.ndarray:
        """State vector on C^M (x) C^N, Alice's index major."""
        return self.coeffs.reshape(-1)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BipartiteState):
            return NotImplemented
        return self.coeffs.shape == other.coeffs.shape and bool(
            np.array_equal(self.coeffs, other.coeffs)
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class SchmidtForm:
    """``coeffs == left.conj().T @ diag(lambdas) @ right`` (diag padded to M x N).

    ``lambdas`` has length min(M, N), descending, zeros kept; ``rank`` counts
    the coefficients above the decomposition tolerance.
    """

    lambdas: np.ndarray
    rank: int
    left: np.ndarray
    right: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.left.shape[0], self.right.shape[0]

    def diagonal(self) -> np.ndarray:
        """The M x N diagonal coefficient matrix."""
        return diag_matrix(self.lambdas, *self.shape)


def diag_matrix(values: Sequence[float], rows: int, cols: int) -> np.ndarray:
    values = np.asarray(values)
    k = min(rows, cols)
    if np.any(np.abs(values[k:]) > 0):
        raise DimensionMismatch(
            f"{np.count_nonzero(values)} nonzero values do not fit a {rows}x{cols} diagonal"
        )
    out = np.zeros((rows, cols), dtype=complex)
    n = min(k, values.size)
    out[np.arange(n), np.arange(n)] = values[:n]
    return out


def validate_state(
    raw,
    dim_a: int | None = None,
    dim_b: int | None = None,
    *,
    normalize: bool = False,
    tol: float = NORM_TOL,
) -> BipartiteState:
    """Check shape and normalization of a coefficient matrix and wrap it.

    With ``normalize=True`` any nonzero matrix is rescaled to unit norm
    instead of being rejected.
    """
    c = np.asarray(raw, dtype=complex)
    if c.ndim != 2:
        raise DimensionMismatch(f"coefficient matrix must be 2-D, got shape {c.shape}")
    if dim_a is not None and c.shape[0] != dim_a or dim_b is not None and c.shape[1] != dim_b:
        raise DimensionMismatch(f"expected {dim_a}x{dim_b}, got {c.shape[0]}x{c.shape[1]}")
    if c.size == 0:
        raise DimensionMismatch("empty coefficient matrix")
    if not np.all(np.isfinite(c)):
        raise NotNormalized("coefficient matrix has non-finite entries")
    norm2 = float(np.sum(np.abs(c) ** 2))
    if normalize:
        if norm2 == 0.0:
            raise NotNormalized("cannot normalize the zero matrix")
        c = c / np.sqrt(norm2)
    elif abs(norm2 - 1.0) > tol:
        raise NotNormalized(f"squared norm {norm2!r} deviates from 1 by more than {tol:g}")
    return BipartiteState(_frozen(c))


def state_from_schmidt(
    lambdas: Sequence[float], dim_a: int | None = None, dim_b: int | None = None
) -> BipartiteState:
    """Diagonal state with the given Schmidt coefficients."""
    lam = np.asarray(lambdas, dtype=float)
    dim_a = lam.size if dim_a is None else dim_a
    dim_b = lam.size if dim_b is None else dim_b
    return validate_state(diag_matrix(lam, dim_a, dim_b), tol=1e-10)


def maximally_entangled(m: int, dim_a: int | None = None, dim_b: int | None = None) -> BipartiteState:
    """The m-ME state (1/sqrt m) sum_{i<m} |i>|i>."""
    return state_from_schmidt(np.full(m, 1 / np.sqrt(m)), dim_a or m, dim_b or m)


def schmidt_decompose(state: BipartiteState, tol: float = 1e-10) -> SchmidtForm:
    c = state.coeffs
    try:
        w, s, vh = np.linalg.svd(c)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"SVD did not converge: {exc}") from exc
    # Phase convention: first nonzero entry of each left singular vector real positive.
    phases = np.ones(w.shape[1], dtype=complex)
    for j in range(w.shape[1]):
        col = w[:, j]
        nz = np.flatnonzero(np.abs(col) > tol)
        if nz.size:
            z = col[nz[0]]
            phases[j] = z / abs(z)
    w = w * phases.conj()
    k = s.size
    vh = vh.copy()
    vh[:k] = vh[:k] * phases[:k, None]
    return SchmidtForm(
        lambdas=_frozen(s),
        rank=int(np.count_nonzero(s > tol)),
        left=_frozen(w.conj().T),
        right=_frozen(vh),
    )


def reduced_density(state: BipartiteState, side: str = "A") -> np.ndarray:
    """rho_A = c c^dagger (M x M) or rho_B = c^T c^* (N x N)."""
    c = state.coeffs
    side = side.upper()
    if side == "A":
        rho = c @ c.conj().T
    elif side == "B":
        rho = c.T @ c.conj()
    else:
        raise ValueError(f"side must be 'A' or 'B', not {side!r}")
    return (rho + rho.conj().T) / 2


def partial_trace(psi, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Reduced density matrix of the factors ``keep`` of a pure state.

    ``psi`` is a state vector over the ordered tensor factors with sizes
    ``dims``.  Kept factors appear in increasing index order.
    """
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    dims = [int(d) for d in dims]
    if int(np.prod(dims)) != psi.size:
        raise DimensionMismatch(f"factor dimensions {dims} do not multiply to {psi.size}")
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= len(dims) for k in keep):
        raise DimensionMismatch(f"keep={keep} out of range for {len(dims)} factors")
    t = np.moveaxis(psi.reshape(dims), keep, range(len(keep)))
    dk = int(np.prod([dims[k] for k in keep]))
    m = t.reshape(dk, -1)
    return m @ m.conj().T


def _probability_vector(v, name: str, tol: float) -> np.ndarray:
    v = np.asarray(v, dtype=float).reshape(-1)
    if np.any(v < -tol) or abs(v.sum() - 1.0) > tol:
        raise NotNormalized(f"{name} is not a probability vector (sum {v.sum()!r})")
    return v


def majorizes(x, y, tol: float = 1e-10, *, norm_tol: float = NORM_TOL) -> bool:
    """True iff x is majorized by y (x < y): sorted prefix sums of x never exceed y's."""
    x = _probability_vector(x, "x", norm_tol)
    y = _probability_vector(y, "y", norm_tol)
    d = max(x.size, y.size)
    xs = np.sort(np.pad(x, (0, d - x.size)))[::-1]
    ys = np.sort(np.pad(y, (0, d - y.size)))[::-1]
    return bool(np.all(np.cumsum(xs) <= np.cumsum(ys) + tol))


def overlap(s1: BipartiteState, s2: BipartiteState) -> float:
    """Fidelity |<s1|s2>|^2."""
    if s1.coeffs.shape != s2.coeffs.shape:
        raise DimensionMismatch(f"shapes {s1.coeffs.shape} and {s2.coeffs.shape} differ")
    return float(abs(np.vdot(s1.coeffs, s2.coeffs)) ** 2)


def apply_local(
    state: BipartiteState, op_a, op_b=None
) -> tuple[float, BipartiteState | None]:
    """Apply ``op_a`` on Alice and ``op_b`` on Bob; return (weight, renormalized state).

    The weight is the squared norm of ``op_a @ c @ op_b.T``; a zero weight
    returns ``None`` for the state.
    """
    c = state.coeffs
    op_a = np.asarray(op_a, dtype=complex)
    op_b = np.eye(c.shape[1]) if op_b is None else np.asarray(op_b, dtype=complex)
    if op_a.ndim != 2 or op_a.shape[1] != c.shape[0]:
        raise DimensionMismatch(f"Alice operator {op_a.shape} does not act on dimension {c.shape[0]}")
    if op_b.ndim != 2 or op_b.shape[1] != c.shape[1]:
        raise DimensionMismatch(f"Bob operator {op_b.shape} does not act on dimension {c.shape[1]}")
    out = op_a @ c @ op_b.T
    weight = float(np.sum(np.abs(out) ** 2))
    if weight <= 1e-300:
        return 0.0, None
    return weight, BipartiteState(_frozen(out / np.sqrt(weight)))


def is_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    u = np.asarray(u)
    return u.shape[0] == u.shape[1] and unitarity_error(u) <= tol


def unitarity_error(u: np.ndarray) -> float:
    u = np.asarray(u)
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[1]))))


def complete_isometry(columns: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Extend orthonormal columns to a square unitary, keeping them as the leading block."""
    s = np.asarray(columns, dtype=complex)
    rows, k = s.shape
    err = float(np.max(np.abs(s.conj().T @ s - np.eye(k)))) if k else 0.0
    if k > rows or err > tol:
        raise NotIsometry(f"columns are not orthonormal (max deviation {err:.3g})")
    if k == rows:
        return s.copy()
    # Orthonormal basis of the complement from the full SVD of the projector residual.
    u, _, _ = np.linalg.svd(np.eye(rows) - s @ s.conj().T)
    return np.hstack([s, u[:, : rows - k]])


def random_state(rng: np.random.Generator, dim_a: int, dim_b: int) -> BipartiteState:
    c = rng.normal(size=(dim_a, dim_b)) + 1j * rng.normal(size=(dim_a, dim_b))
    return validate_state(c, normalize=True)


def random_spectrum(rng: np.random.Generator, d: int, rank: int | None = None) -> np.ndarray:
    """Descending Schmidt vector of length d with ``rank`` nonzero entries (squares sum to 1)."""
    rank = d if rank is None else rank
    w = np.zeros(d)
    w[:rank] = rng.dirichlet(np.ones(rank))
    return np.sqrt(np.sort(w)[::-1])
