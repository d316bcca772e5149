"""JSON state files and report serialization.

A state file looks like::

    {"dims": [2, 2], "matrix": [[[0.6, 0.0], [0.0, 0.0]],
                                [[0.0, 0.0], [0.8, 0.0]]]}

with every complex entry written as ``[re, im]``, rows in order.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, ValidationError
from .statecore import BipartiteState, validate_state


def state_to_dict(state: BipartiteState) -> dict:
    c = state.coeffs
    return {
        "dims": [int(c.shape[0]), int(c.shape[1])],
        "matrix": [[[float(z.real), float(z.imag)] for z in row] for row in c],
    }


def state_from_dict(data: dict, *, normalize: bool = False) -> BipartiteState:
    try:
        dims = [int(d) for d in data["dims"]]
        rows = data["matrix"]
        c = np.array([[complex(float(re), float(im)) for re, im in row] for row in rows], dtype=complex)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed state file: {exc}") from exc
    if len(dims) != 2 or c.ndim != 2 or list(c.shape) != dims:
        raise DimensionMismatch(f"dims {dims} do not match matrix shape {list(c.shape)}")
    return validate_state(c, *dims, normalize=normalize)


def read_state_file(path, *, normalize: bool = False) -> BipartiteState:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid JSON ({exc})") from exc
    return state_from_dict(data, normalize=normalize)


def write_state_file(path, state: BipartiteState) -> None:
    Path(path).write_text(dumps(state_to_dict(state)) + "\n")


def _format(obj, indent: int, level: int) -> str:
    pad = "\n" + " " * (indent * (level + 1)) if indent else ""
    end = "\n" + " " * (indent * level) if indent else ""
    sep = "," + pad if indent else ", "
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return format(x, ".17g") if math.isfinite(x) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = (f"{json.dumps(str(k))}: {_format(v, indent, level + 1)}" for k, v in obj.items())
        return "{" + pad + sep.join(items) + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        # numeric leaves stay on one line
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq):
            return "[" + ", ".join(_format(v, 0, 0) for v in seq) + "]"
        return "[" + pad + sep.join(_format(v, indent, level + 1) for v in seq) + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """JSON text with every float written to 17 significant digits."""
    return _format(obj, indent, 0)


def digest(obj) -> str:
    return hashlib.sha256(dumps(obj, indent=0).encode()).hexdigest()


def complex_matrix(m) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m, dtype=complex)]
