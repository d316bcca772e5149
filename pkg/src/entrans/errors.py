"""Exception hierarchy.

Two families matter to callers: :class:`ValidationError` (malformed input,
CLI exit code 1) and :class:`InfeasibleError` (well-formed input describing a
transformation that cannot be done, CLI exit code 2).
"""

from __future__ import annotations


class EntanglementError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(EntanglementError, ValueError):
    pass


class DimensionMismatch(ValidationError):
    pass


class NotNormalized(ValidationError):
    pass


class NotIsometry(ValidationError):
    pass


class SingularInput(ValidationError):
    pass


class DimensionOverflow(ValidationError):
    pass


class InfeasibleError(EntanglementError):
    pass


class InfeasibleTarget(InfeasibleError):
    pass


class NotMajorized(InfeasibleError):
    pass


class InfeasibleDistribution(InfeasibleError):
    pass


class NotContraction(InfeasibleError, ValueError):
    """Operator norm exceeds one (a requested probability is above the optimum)."""


class NumericalFailure(EntanglementError, ArithmeticError):
    pass
