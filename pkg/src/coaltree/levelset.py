"""Level-set trees of finite time series and white-noise constructions.

A series of values ``x_0..x_m`` is read as a continuous piecewise-linear
function on [0, m].  Its level-set tree describes how the superlevel sets
split as the threshold drops: leaves are the local maxima, internal vertices
the internal local minima, and each internal vertex marks the value at which
two excursions merge.  The recursion splits every segment at its lowest
internal minimum.

Degenerate inputs (plateaus of equal consecutive values, tied internal
minima) are rejected outright rather than silently perturbed, so downstream
distributional tests see exactly the sampled data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSeriesError, DomainError
from .rng import as_generator
from .treecore import RootedTree

__all__ = [
    "Extrema",
    "local_extrema",
    "level_set_tree",
    "extend_white_noise",
    "sample_white_noise",
    "path_pseudo_metric_dX",
    "read_series",
    "write_series",
]

DISTRIBUTIONS = ("uniform01", "gaussian", "exponential")


@dataclass
class Extrema:
    """Strict local maxima and strict internal local minima of a series."""

    max_pos: np.ndarray
    max_val: np.ndarray
    min_pos: np.ndarray
    min_val: np.ndarray


def _check_no_plateau(x: np.ndarray):
    eq = np.nonzero(x[1:] == x[:-1])[0]
    if eq.size:
        raise DegenerateSeriesError(
            f"plateau: equal consecutive values at positions {int(eq[0])}, {int(eq[0]) + 1}"
        )


def local_extrema(series) -> Extrema:
    """Scan for strict local maxima and strict internal local minima.

    A larger endpoint counts as a local maximum; minima at the boundary are
    excluded (they are never internal vertices of the level-set tree).  A
    single-point series is one maximum.
    """
    x = np.asarray(series, dtype=np.float64)
    if x.ndim != 1 or x.size < 1:
        raise DomainError("series must be a non-empty 1-d sequence")
    if x.size == 1:
        return Extrema(np.array([0]), x[:1].copy(), np.array([], dtype=np.int64), np.array([]))
    _check_no_plateau(x)
    up_left = np.empty(x.size, dtype=bool)   # rises coming from the left
    up_left[0] = True
    up_left[1:] = x[1:] > x[:-1]
    down_right = np.empty(x.size, dtype=bool)  # falls going to the right
    down_right[-1] = True
    down_right[:-1] = x[1:] < x[:-1]
    is_max = up_left & down_right
    is_min = ~up_left & ~down_right
    is_min[0] = is_min[-1] = False
    max_pos = np.nonzero(is_max)[0]
    min_pos = np.nonzero(is_min)[0]
    return Extrema(max_pos, x[max_pos], min_pos, x[min_pos])


def level_set_tree(series) -> RootedTree:
    """Level-set tree of a series, time-oriented by value.

    Leaves carry the local-maxima values, internal vertices the internal
    local-minima values; the root is the lowest internal minimum (marks
    decrease toward the root).  Tied internal minima raise
    :class:`DegenerateSeriesError`.
    """
    ext = local_extrema(series)
    m = ext.max_pos.size
    if m == 0:
        raise DegenerateSeriesError("series has no local maximum")
    if np.unique(ext.min_val).size != ext.min_val.size:
        raise DegenerateSeriesError("tied internal local minima")
    if m == 1:
        return RootedTree.leaf(float(ext.max_val[0]))
    # maxima and internal minima strictly alternate: minima[i] lies between
    # maxima i and i+1
    if ext.min_pos.size != m - 1 or not np.all(
        (ext.min_pos > ext.max_pos[:-1]) & (ext.min_pos < ext.max_pos[1:])
    ):
        raise DegenerateSeriesError("extrema do not alternate")
    minima = ext.min_val
    n_vert = 2 * m - 1
    children = np.full((n_vert, 2), -1, dtype=np.int32)
    marks = np.empty(n_vert)
    marks[:m] = ext.max_val  # leaves first
    next_id = m

    # post-order over maxima ranges [lo, hi]; split at the lowest minimum
    result: dict[tuple[int, int], int] = {}
    stack = [(0, m - 1, False)]
    while stack:
        lo, hi, ready = stack.pop()
        if lo == hi:
            result[(lo, hi)] = lo
            continue
        k = lo + int(np.argmin(minima[lo:hi]))
        if not ready:
            stack.append((lo, hi, True))
            stack.append((k + 1, hi, False))
            stack.append((lo, k, False))
        else:
            v = next_id
            next_id += 1
            children[v, 0] = result[(lo, k)]
            children[v, 1] = result[(k + 1, hi)]
            marks[v] = minima[k]
            result[(lo, hi)] = v
    return RootedTree(children, marks)


def extend_white_noise(w) -> np.ndarray:
    """Interleave artificial separating maxima between i.i.d. minima.

    From N-1 pairwise-distinct values, build a series of length 2N-1 whose
    even (1-based) positions carry the input and whose odd positions carry
    the larger clamped neighbor plus 1, yielding exactly N local maxima and
    the inputs as the N-1 internal minima.
    """
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 1 or w.size < 1:
        raise DomainError("need at least one value")
    if np.unique(w).size != w.size:
        raise DegenerateSeriesError("white-noise values must be pairwise distinct")
    m = w.size
    out = np.empty(2 * m + 1)
    out[1::2] = w
    left = np.concatenate([w[:1], w])    # clamp at the ends
    right = np.concatenate([w, w[-1:]])
    out[0::2] = np.maximum(left, right) + 1.0
    return out


def sample_white_noise(n: int, distribution: str = "uniform01", seed=0) -> np.ndarray:
    """Draw ``n`` i.i.d. values; the level-set shape law does not depend on
    which continuous distribution is used."""
    if n < 0:
        raise DomainError("n must be >= 0")
    if distribution not in DISTRIBUTIONS:
        raise DomainError(f"unknown distribution {distribution!r}")
    rng = as_generator(seed)
    return _draw(n, distribution, rng)


def _draw(n: int, distribution: str, rng) -> np.ndarray:
    if distribution == "uniform01":
        return rng.random(n)
    if distribution == "gaussian":
        return rng.standard_normal(n)
    return rng.standard_exponential(n)


def path_pseudo_metric_dX(series, a: float, b: float) -> float:
    """Pseudo-metric d_X(a,b) = (X(a) - inf X) + (X(b) - inf X) with the
    infimum over [a^b, avb] and piecewise-linear interpolation."""
    x = np.asarray(series, dtype=np.float64)
    if x.ndim != 1 or x.size < 1:
        raise DomainError("series must be a non-empty 1-d sequence")
    hi = float(x.size - 1)
    if not (0.0 <= a <= hi) or not (0.0 <= b <= hi):
        raise DomainError(f"points must lie in [0, {hi}]")
    lo, up = (a, b) if a <= b else (b, a)
    xa = float(np.interp(a, np.arange(x.size), x))
    xb = float(np.interp(b, np.arange(x.size), x))
    inf = min(xa, xb)
    k0, k1 = int(np.ceil(lo)), int(np.floor(up))
    if k1 >= k0:
        inf = min(inf, float(np.min(x[k0 : k1 + 1])))
    return (xa - inf) + (xb - inf)


def read_series(fileobj) -> np.ndarray:
    """One decimal value per line; blank lines ignored."""
    vals = [float(line) for line in fileobj if line.strip()]
    return np.array(vals, dtype=np.float64)


def write_series(series, fileobj):
    for v in np.asarray(series, dtype=np.float64):
        fileobj.write(f"{v!r}\n")
