"""Probabilistic single-copy transformation by unitary dilation.

Alice shrinks her Schmidt coefficients with a diagonal contraction ``A``
(``A @ Lambda_d == sqrt(p) * Sigma_d``) and realizes it without an ancilla:
her space is doubled and ``A`` becomes the top-left block of the unitary

    U0 = [[A,               -(I - A A^dag)^(1/2)],
          [(I - A^dag A)^(1/2),  A^dag           ]]

Projecting onto the first M rows of the output yields the target with
probability ``p``.  Bob does nothing and nothing is communicated.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import numpy as np

from .errors import DimensionMismatch, InfeasibleTarget, NotContraction, NotNormalized
from .statecore import (
    BipartiteState,
    SchmidtForm,
    _frozen,
    diag_matrix,
    schmidt_decompose,
)

SCHMIDT_TOL = 1e-10


def _spectra(lam, sigma, tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Sort both Schmidt vectors descending and zero-pad them to a common length."""
    lam = np.asarray(lam, dtype=float).reshape(-1)
    sigma = np.asarray(sigma, dtype=float).reshape(-1)
    for name, v in (("lambda", lam), ("sigma", sigma)):
        if np.any(v < 0) or abs(np.sum(v**2) - 1.0) > tol:
            raise NotNormalized(f"{name} is not a normalized Schmidt vector")
    d = max(lam.size, sigma.size)
    lam = np.sort(np.pad(lam, (0, d - lam.size)))[::-1]
    sigma = np.sort(np.pad(sigma, (0, d - sigma.size)))[::-1]
    return lam, sigma


def optimal_probability(lam, sigma, tol: float = SCHMIDT_TOL) -> float:
    """Best success probability min_k lambda_k^2 / sigma_k^2 over sigma_k > 0.

    Returns 0 when the target needs a Schmidt coefficient the input lacks.
    """
    lam, sigma = _spectra(lam, sigma)
    support = sigma > tol
    if np.any(lam[support] <= tol):
        return 0.0
    ratios = lam[support] ** 2 / sigma[support] ** 2
    return float(min(1.0, max(0.0, ratios.min())))


@dataclass(frozen=True, eq=False)
class Contraction:
    """Diagonal contraction A = diag(cos theta_i)."""

    diag: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.diag, dtype=float)
        if np.any(d < 0) or np.any(d > 1 + 1e-12):
            raise NotContraction(f"diagonal {d} leaves [0, 1]")
        object.__setattr__(self, "diag", _frozen(np.clip(d, 0.0, 1.0)))

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(self.diag).astype(complex)

    @property
    def angles(self) -> np.ndarray:
        return np.arccos(self.diag)

    def defect(self) -> np.ndarray:
        """Diagonal of (I - A^dag A)^(1/2), i.e. sin theta_i."""
        return np.sqrt(1.0 - self.diag**2)


def contraction_for(lam, sigma, p: float | None = None, tol: float = SCHMIDT_TOL) -> Contraction:
    """Contraction with ``A @ Lambda_d == sqrt(p) * Sigma_d``.

    ``p=None`` selects the optimum, where cos theta_i = (sigma_i/lambda_i) /
    max_k (sigma_k/lambda_k) and the largest entry is exactly one.
    """
    lam, sigma = _spectra(lam, sigma)
    support = sigma > tol
    if np.any(lam[support] <= tol):
        raise NotContraction("target has a Schmidt coefficient where the input has none")
    ratio = np.zeros_like(lam)
    ratio[support] = sigma[support] / lam[support]
    if p is None:
        return Contraction(ratio / ratio.max())
    if not 0 < p <= 1:
        raise ValueError(f"probability must lie in (0, 1], got {p}")
    c = np.sqrt(p) * ratio
    if c.max() > 1 + 1e-12:
        raise NotContraction(
            f"p={p!r} exceeds the optimum {optimal_probability(lam, sigma)!r}"
        )
    return Contraction(c)


def _defects(a) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (A, (I - A A^dag)^(1/2), (I - A^dag A)^(1/2))."""
    if isinstance(a, Contraction):
        s = np.diag(a.defect()).astype(complex)
        return a.matrix, s, s
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"contraction must be square, got {a.shape}")
    # Both defect operators from one SVD, so the block identities hold to rounding.
    w, s, vh = np.linalg.svd(a)
    if s.size and s[0] > 1 + 1e-12:
        raise NotContraction(f"operator norm {s[0]!r} exceeds 1")
    c = np.sqrt(np.clip(1.0 - s**2, 0.0, None))
    left = (w * c) @ w.conj().T
    right = (vh.conj().T * c) @ vh
    return a, left, right


@dataclass(frozen=True, eq=False)
class DilationPlan:
    contraction: Contraction | np.ndarray
    u0: np.ndarray
    success_prob: float | None = None

    @property
    def dim(self) -> int:
        return self.u0.shape[0] // 2

    @property
    def success_rows(self) -> range:
        return range(0, self.dim)

    @property
    def failure_rows(self) -> range:
        return range(self.dim, 2 * self.dim)


def dilation_unitary(a) -> DilationPlan:
    """Embed a contraction (``Contraction`` or square matrix) into a 2M x 2M unitary."""
    a_mat, left, right = _defects(a)
    u0 = np.block([[a_mat, -left], [right, a_mat.conj().T]])
    return DilationPlan(contraction=a, u0=_frozen(u0))


@dataclass(frozen=True, eq=False)
class TransformOutcome:
    """Both branches of the dilated transformation.

    ``output`` is the 2M x N coefficient matrix on Alice's doubled space, in the
    Schmidt bases of the input.  ``success_state`` is expressed in the target's
    original bases; ``failure_state`` stays in the input's Schmidt bases and is
    ``None`` when the failure weight vanishes.
    """

    success_prob: float
    failure_prob: float
    success_state: BipartiteState
    failure_state: BipartiteState | None
    output: np.ndarray
    plan: DilationPlan
    input_form: SchmidtForm = field(repr=False)
    target_form: SchmidtForm = field(repr=False)


def _target_lambdas(target_form: SchmidtForm, length: int) -> np.ndarray:
    sig = np.asarray(target_form.lambdas)
    if sig.size > length:
        if np.any(sig[length:] > SCHMIDT_TOL):
            raise InfeasibleTarget("target Schmidt rank exceeds the input's")
        sig = sig[:length]
    return np.pad(sig, (0, length - sig.size))


def transform_single_copy(
    state: BipartiteState, target: BipartiteState, p: float | None = None
) -> TransformOutcome:
    """Transform ``state`` into ``target`` with Alice's dilated contraction.

    ``p=None`` runs at the optimal probability.
    """
    fin = schmidt_decompose(state)
    ftg = schmidt_decompose(target)
    lam = np.asarray(fin.lambdas)
    sig = _target_lambdas(ftg, lam.size)
    p_opt = optimal_probability(lam, sig)
    if p_opt == 0.0:
        raise InfeasibleTarget("optimal success probability is zero")
    contraction = contraction_for(lam, sig, p)
    m, n = fin.shape
    a_full = np.ones(m)
    a_full[: lam.size] = contraction.diag
    plan = dilation_unitary(Contraction(a_full))

    extended = np.vstack([fin.diagonal(), np.zeros((m, n))])
    output = plan.u0 @ extended
    top, bottom = output[:m], output[m:]
    w_succ = float(np.sum(np.abs(top) ** 2))
    w_fail = float(np.sum(np.abs(bottom) ** 2))

    # top is diagonal in the Schmidt bases: its entries are the target's coefficients
    succ_diag = np.real(np.diag(top)) / np.sqrt(w_succ)
    mt, nt = ftg.shape
    local = diag_matrix(np.pad(succ_diag, (0, max(0, min(mt, nt) - succ_diag.size)))[: min(mt, nt)], mt, nt)
    success = BipartiteState(_frozen(ftg.left.conj().T @ local @ ftg.right))
    failure = None
    if w_fail > 1e-24:
        failure = BipartiteState(_frozen(bottom / np.sqrt(w_fail)))
    plan = DilationPlan(contraction, plan.u0, success_prob=w_succ)
    return TransformOutcome(
        success_prob=w_succ,
        failure_prob=w_fail,
        success_state=success,
        failure_state=failure,
        output=_frozen(output),
        plan=plan,
        input_form=fin,
        target_form=ftg,
    )


def residual_extractability(contraction: Contraction, lam, sigma, tol: float = SCHMIDT_TOL) -> float:
    """min over sigma_k > 0 of sin^2(theta_k) lambda_k^2 / sigma_k^2.

    Zero means no further copy of the target can be extracted from the
    failure branch.
    """
    lam, sigma = _spectra(lam, sigma)
    d = np.asarray(contraction.diag)
    sin2 = np.zeros_like(lam)
    sin2[: d.size] = 1.0 - d**2
    support = sigma > tol
    return float(np.min(sin2[support] * lam[support] ** 2 / sigma[support] ** 2))


def concentrate(state: BipartiteState, m: int) -> TransformOutcome:
    """Concentrate into the m-ME state; success probability m * lambda_m^2.

    For m = 1 the target is |0>|0> in the input's Schmidt bases and the
    probability is lambda_1^2.
    """
    form = schmidt_decompose(state)
    if m < 1:
        raise ValueError(f"m must be positive, got {m}")
    if m > form.rank:
        raise InfeasibleTarget(f"m={m} exceeds the Schmidt rank {form.rank}")
    dim_a, dim_b = form.shape
    sigma = np.zeros(form.lambdas.size)
    sigma[:m] = 1 / np.sqrt(m)
    # Target in the input's own Schmidt bases: only Alice's contraction is needed.
    target = BipartiteState(_frozen(form.left.conj().T @ diag_matrix(sigma, dim_a, dim_b) @ form.right))
    return transform_single_copy(state, target)


def concentration_probability(lam, m: int) -> float:
    """Closed form m * lambda_m^2 (lambda sorted descending)."""
    lam = np.sort(np.asarray(lam, dtype=float))[::-1]
    return float(m * lam[m - 1] ** 2)


@dataclass(frozen=True, eq=False)
class BilateralOutcome:
    """The four orthogonal components of a two-sided dilated contraction.

    Components are ordered (A, B), (A, B~), (A~, B), (A~, B~); each entry of
    ``components`` is ``(weight, normalized M x N matrix or None)``.
    """

    output: np.ndarray
    components: tuple[tuple[float, np.ndarray | None], ...]

    @property
    def weights(self) -> tuple[float, ...]:
        return tuple(w for w, _ in self.components)


def bilateral_transform(state: BipartiteState, a, b) -> BilateralOutcome:
    """Alice dilates contraction ``a``, Bob dilates ``b``; both in the Schmidt bases."""
    form = schmidt_decompose(state)
    m, n = form.shape
    ua = dilation_unitary(a).u0
    ub = dilation_unitary(b).u0
    if ua.shape[0] != 2 * m or ub.shape[0] != 2 * n:
        raise DimensionMismatch(f"contractions of size {ua.shape[0] // 2}/{ub.shape[0] // 2} for a {m}x{n} state")
    extended = np.zeros((2 * m, 2 * n), dtype=complex)
    extended[:m, :n] = form.diagonal()
    out = ua @ extended @ ub.T
    comps = []
    for rows in (slice(0, m), slice(m, 2 * m)):
        for cols in (slice(0, n), slice(n, 2 * n)):
            block = out[rows, cols]
            w = float(np.sum(np.abs(block) ** 2))
            comps.append((w, block / np.sqrt(w) if w > 1e-24 else None))
    return BilateralOutcome(output=_frozen(out), components=tuple(comps))


def schmidt_vector(matrix: np.ndarray) -> np.ndarray:
    """Descending singular values of a (normalized) coefficient matrix."""
    return np.linalg.svd(np.asarray(matrix), compute_uv=False)

