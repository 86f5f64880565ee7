"""Ordinal patterns of real-valued windows.

A window ``(x_0, ..., x_h)`` is mapped to the permutation ``(r_0, ..., r_h)``
listing the positions of its values from largest to smallest. Equal values
are listed by descending position, so a constant window maps to
``(h, h-1, ..., 0)``.

Patterns are indexed densely by the lexicographic rank of ``order``; this is
the index used by every counting array in the package.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations
from math import factorial
from typing import Sequence

import numpy as np

from .errors import DimensionError, InvalidInputError

# (h+1)! sized tables; 9! = 362880
MAX_ORDER = 8


@dataclass(frozen=True)
class Pattern:
    order: tuple[int, ...]

    def __post_init__(self):
        order = tuple(int(v) for v in self.order)
        if len(order) < 2:
            raise InvalidInputError("a pattern needs at least two entries")
        if sorted(order) != list(range(len(order))):
            raise InvalidInputError(f"{order} is not a permutation of 0..{len(order) - 1}")
        object.__setattr__(self, "order", order)

    @property
    def h(self) -> int:
        return len(self.order) - 1

    def __iter__(self):
        return iter(self.order)

    def __len__(self):
        return len(self.order)


def check_order(h: int, cap: int = MAX_ORDER, allow_large: bool = False) -> int:
    if int(h) != h or h < 1:
        raise InvalidInputError(f"pattern order must be a positive integer, got {h!r}")
    if h > cap and not allow_large:
        raise DimensionError(
            f"order h={h} exceeds the cap of {cap} ({factorial(cap + 1)} patterns); "
            "pass allow_large=True to override"
        )
    return int(h)


def n_patterns(h: int) -> int:
    return factorial(h + 1)


def pattern_of(window: Sequence[float]) -> Pattern:
    x = [float(v) for v in window]
    if len(x) < 2:
        raise InvalidInputError("window must contain at least two values")
    if not all(np.isfinite(x)):
        raise InvalidInputError("window contains non-finite values")
    return Pattern(tuple(sorted(range(len(x)), key=lambda j: (-x[j], -j))))


def reflect(p: Pattern) -> Pattern:
    return Pattern(p.order[::-1])


def pattern_index(p: Pattern) -> int:
    """Lexicographic rank of ``p.order`` among permutations of 0..h."""
    order = p.order if isinstance(p, Pattern) else Pattern(tuple(p)).order
    size = len(order)
    rank = 0
    for t, v in enumerate(order):
        smaller_later = sum(1 for u in order[t + 1:] if u < v)
        rank += smaller_later * factorial(size - 1 - t)
    return rank


def unrank(index: int, h: int) -> Pattern:
    size = h + 1
    if not 0 <= index < factorial(size):
        raise InvalidInputError(f"index {index} out of range for h={h}")
    remaining = list(range(size))
    order = []
    for t in range(size):
        f = factorial(size - 1 - t)
        q, index = divmod(index, f)
        order.append(remaining.pop(q))
    return Pattern(tuple(order))


@lru_cache(maxsize=None)
def all_patterns(h: int) -> np.ndarray:
    """Array of shape ((h+1)!, h+1); row i is ``unrank(i, h).order``."""
    table = np.array(list(permutations(range(h + 1))), dtype=np.int64)
    table.flags.writeable = False
    return table


def as_series(values, name: str = "series") -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise InvalidInputError(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(arr)):
        bad = np.flatnonzero(~np.isfinite(arr))[:5].tolist()
        raise InvalidInputError(f"{name} contains non-finite values at positions {bad}")
    return arr


def pattern_sequence(series, h: int, allow_large: bool = False) -> np.ndarray:
    """Pattern indices of all ``n - h`` windows of ``series``.

    Each comparison ``x[t] > x[t + d]`` is evaluated once per lag ``d`` and
    shared by every window containing both positions.
    """
    h = check_order(h, allow_large=allow_large)
    x = as_series(series)
    n = x.size
    if n <= h:
        raise InvalidInputError(f"series of length {n} has no windows of order {h}")
    m = n - h
    # greater[d][t] is x[t] > x[t + d]
    greater = [None] + [x[:-d] > x[d:] for d in range(1, h + 1)]
    fact = np.array([factorial(k) for k in range(h + 1)], dtype=np.int64)
    dtype = np.int8 if h < 127 else np.int32

    rank = np.zeros(m, dtype=np.int64)
    for j in range(h + 1):
        pos = np.zeros(m, dtype=dtype)
        less = np.zeros(m, dtype=dtype)
        for a in range(j):
            above = greater[j - a][a:a + m]
            pos += above
            less += ~above
        for a in range(j + 1, h + 1):
            # a > j sorts before j unless x[j] > x[a]
            pos += ~greater[a - j][j:j + m]
        if j == 0:
            continue  # less is identically zero
        rank += less * fact[h - pos]
    return rank


def pattern_frequencies(indices: np.ndarray, h: int, n: int) -> np.ndarray:
    """Counts of each pattern divided by ``n`` (not by the number of windows)."""
    counts = np.bincount(indices, minlength=n_patterns(h))
    return counts / n
