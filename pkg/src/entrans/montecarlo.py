"""Seeded Born-rule sampling.

Trial ``t`` under seed ``s`` always consumes the ``t``-th double of the
Philox stream keyed by ``s``.  Philox is counter based, so any block of
trials can be generated independently of the others and the counts do not
depend on chunking or on the number of worker threads.
"""

from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Hashable, Sequence

import numpy as np

from .errors import NotNormalized

WEIGHT_TOL = 1e-6
CHUNK = 1 << 16  # multiple of 4: Philox emits four doubles per counter step


def _philox(seed: int, counter: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed) & (2**64 - 1), counter=counter))


def trial_uniforms(seed: int, start: int, stop: int) -> np.ndarray:
    """Uniform variates in [0, 1) for trials ``start`` .. ``stop - 1``."""
    if stop <= start:
        return np.empty(0)
    base = start - start % 4
    g = _philox(seed, base // 4)
    return g.random(stop - base)[start - base :]


def _cdf(weights: Sequence[float]) -> np.ndarray:
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.size == 0 or np.any(w < 0) or not np.all(np.isfinite(w)):
        raise NotNormalized(f"invalid branch weights {w}")
    total = w.sum()
    if abs(total - 1.0) > WEIGHT_TOL:
        raise NotNormalized(f"branch weights sum to {total!r}")
    return np.cumsum(w / total)


def sample_outcome(weights: Sequence[float], rng) -> int:
    """Branch index drawn with probability ``weights[i]``.

    ``rng`` is a ``numpy.random.Generator`` or an already drawn uniform in [0, 1).
    """
    cdf = _cdf(weights)
    u = rng.random() if isinstance(rng, np.random.Generator) else float(rng)
    return int(min(np.searchsorted(cdf, u, side="right"), cdf.size - 1))


@dataclass(frozen=True)
class BornProtocol:
    """One Born-rule measurement over fixed branch weights.

    Calling it on an array of uniforms returns the labels of the sampled
    branches; ``labels`` defaults to the branch indices.
    """

    weights: tuple[float, ...]
    labels: tuple[Hashable, ...] | None = None

    def __call__(self, u: np.ndarray) -> np.ndarray:
        cdf = _cdf(self.weights)
        idx = np.minimum(np.searchsorted(cdf, u, side="right"), cdf.size - 1)
        if self.labels is None:
            return idx
        return np.asarray(self.labels, dtype=object)[idx]


@dataclass(frozen=True)
class TrialStats:
    trials: int
    counts: dict = field(default_factory=dict)

    @property
    def frequencies(self) -> dict:
        return {k: c / self.trials for k, c in self.counts.items()}

    @property
    def std_error(self) -> dict:
        return {k: math.sqrt(f * (1 - f) / self.trials) for k, f in self.frequencies.items()}

    def frequency(self, label) -> float:
        return self.counts.get(label, 0) / self.trials


def within_band(freq: float, p: float, trials: int, sigmas: float = 3.0) -> bool:
    """|freq - p| within ``sigmas`` binomial standard deviations of p."""
    half = sigmas * math.sqrt(p * (1 - p) / trials)
    return abs(freq - p) <= half + 1e-15


def estimate_success(
    protocol: Callable[[np.ndarray], np.ndarray],
    trials: int,
    seed: int = 0,
    *,
    workers: int = 1,
) -> TrialStats:
    """Run ``trials`` independent trials of a vectorized protocol and count outcomes."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    blocks = [(a, min(a + CHUNK, trials)) for a in range(0, trials, CHUNK)]

    def run(block: tuple[int, int]) -> Counter:
        out = protocol(trial_uniforms(seed, *block))
        labels, counts = np.unique(np.asarray(out), return_counts=True)
        return Counter({_plain(l): int(c) for l, c in zip(labels, counts)})

    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, blocks))
    else:
        parts = [run(b) for b in blocks]
    total: Counter = Counter()
    for part in parts:
        total.update(part)
    return TrialStats(trials=trials, counts=dict(sorted(total.items(), key=lambda kv: str(kv[0]))))


def _plain(x):
    return x.item() if isinstance(x, np.generic) else x
