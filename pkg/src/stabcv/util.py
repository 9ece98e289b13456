"""Shared numeric plumbing: Wilson intervals, deterministic reductions, RNG streams."""

from __future__ import annotations

import math
from statistics import NormalDist

import numpy as np

# Two-sided 95% normal quantile, used for every Wilson interval in the package.
WILSON_Z = NormalDist().inv_cdf(0.975)


def wilson_interval(successes: int, total: int, z: float = WILSON_Z) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion.

    Preferred over the normal approximation because empirical tail
    frequencies are routinely 0 or 1 in these experiments.
    """
    if total <= 0:
        return (0.0, 1.0)
    n = float(total)
    p_hat = successes / n
    denom = 1.0 + z * z / n
    center = (p_hat + z * z / (2.0 * n)) / denom
    spread = (z / denom) * math.sqrt(p_hat * (1.0 - p_hat) / n + z * z / (4.0 * n * n))
    return (max(0.0, center - spread), min(1.0, center + spread))


def wilson_halfwidth(successes: int, total: int, z: float = WILSON_Z) -> float:
    lo, hi = wilson_interval(successes, total, z)
    return 0.5 * (hi - lo)


def binomial_stderr(p_hat: float, total: int) -> float:
    """Plain binomial standard error; zero when p_hat is degenerate."""
    if total <= 0:
        return 0.0
    return math.sqrt(max(p_hat * (1.0 - p_hat), 0.0) / total)


def pairwise_sum(values) -> float:
    """Sum in a fixed balanced-tree order.

    The reduction order is a function of len(values) only, so merged results
    are byte-identical no matter how many workers produced the leaves.
    """
    vals = list(values)
    if not vals:
        return 0.0
    while len(vals) > 1:
        nxt = [vals[i] + vals[i + 1] for i in range(0, len(vals) - 1, 2)]
        if len(vals) % 2:
            nxt.append(vals[-1])
        vals = nxt
    return float(vals[0])


def pairwise_mean(values) -> float:
    vals = list(values)
    if not vals:
        raise ValueError("mean of empty sequence")
    return pairwise_sum(vals) / len(vals)


def rng_for_stream(seed: int, *stream: int) -> np.random.Generator:
    """Independent generator for (seed, stream indices).

    Replicate r always gets the same stream regardless of worker count or
    execution order, which is what makes the harness reproducible.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(stream)))


_HALTON_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def _vdc(index: int, base: int) -> float:
    # van der Corput radical inverse
    x, denom = 0.0, 1.0
    while index:
        index, rem = divmod(index, base)
        denom *= base
        x += rem / denom
    return x


def halton_points(count: int, dim: int, skip: int = 20) -> np.ndarray:
    """Quasi-uniform points in [0, 1]^dim (Halton sequence).

    Used for the finite probe grids that stand in for sup-norm evaluation
    over a continuous domain.
    """
    if dim > len(_HALTON_PRIMES):
        raise ValueError(f"halton_points supports dim <= {len(_HALTON_PRIMES)}")
    pts = np.empty((count, dim))
    for j in range(dim):
        base = _HALTON_PRIMES[j]
        pts[:, j] = [_vdc(i + skip, base) for i in range(count)]
    return pts
