"""Transformations of bipartite pure entangled states by one-sided local operations."""

from .deterministic import plan_deterministic, run_deterministic
from .multicopy import finalize_multicopy, min_copies, plan_multicopy
from .singlecopy import concentrate, optimal_probability, transform_single_copy
from .statecore import (
    BipartiteState,
    maximally_entangled,
    schmidt_decompose,
    state_from_schmidt,
    validate_state,
)

__version__ = "0.1.0"

__all__ = [
    "BipartiteState",
    "concentrate",
    "finalize_multicopy",
    "maximally_entangled",
    "min_copies",
    "optimal_probability",
    "plan_deterministic",
    "plan_multicopy",
    "run_deterministic",
    "schmidt_decompose",
    "state_from_schmidt",
    "transform_single_copy",
    "validate_state",
]
