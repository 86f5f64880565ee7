"""Pseudo-metrics on patterns and decreasing weight functions.

A :class:`PatternMetric` and a :class:`WeightFunction` together define one
flavor of weighted ordinal pattern dependence. The discrete metric with the
indicator-at-zero weight recovers plain pattern coincidence.

Metrics operate on pattern *indices* (see :mod:`ordpat.patterns`) so they can
be evaluated on whole index arrays at once.

JSON document format (both keys optional)::

    {
      "h": 2,
      "distances": [[0, 1, ...], ...],   # (h+1)! x (h+1)! table, rows/cols by pattern index
      "weights": {"0": 1.0, "2": 0.5}    # distance -> weight, 0 elsewhere
    }
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from .errors import InvalidInputError
from .patterns import Pattern, all_patterns, n_patterns, pattern_index

METRIC_KINDS = ("discrete", "l1", "chaos", "user-table")
WEIGHT_KINDS = ("indicator-at-zero", "step-table", "user-function")

# distances closer than this are treated as the same table key
_KEY_TOL = 1e-9


def _check_same_order(a: Pattern, b: Pattern) -> None:
    if len(a.order) != len(b.order):
        raise InvalidInputError(f"patterns of different order: h={a.h} vs h={b.h}")


def d_discrete(a: Pattern, b: Pattern) -> float:
    _check_same_order(a, b)
    return 0.0 if a.order == b.order else 1.0


def d_l1(a: Pattern, b: Pattern) -> float:
    _check_same_order(a, b)
    return float(sum(abs(u - v) for u, v in zip(a.order, b.order)))


def chaos_score(p: Pattern) -> float:
    """Smallest l1 distance from ``p`` to either monotone pattern."""
    up = tuple(range(len(p.order)))
    return min(d_l1(p, Pattern(up)), d_l1(p, Pattern(up[::-1])))


def d_chaos(a: Pattern, b: Pattern) -> float:
    _check_same_order(a, b)
    return abs(chaos_score(a) - chaos_score(b))


def _chaos_scores(h: int) -> np.ndarray:
    perms = all_patterns(h)
    up = np.arange(h + 1)
    return np.minimum(np.abs(perms - up).sum(1), np.abs(perms - up[::-1]).sum(1)).astype(float)


@dataclass(frozen=True, eq=False)
class PatternMetric:
    """Pseudo-metric on the patterns of order ``h``.

    Built-in kinds are evaluated lazily from the permutation table, so large
    orders never materialize a full distance matrix. ``user-table`` metrics
    carry an explicit matrix that is checked for the pseudo-metric axioms on
    construction.
    """

    kind: str
    h: int
    table: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in METRIC_KINDS:
            raise InvalidInputError(f"unknown metric kind {self.kind!r}")
        if self.kind == "user-table":
            if self.table is None:
                raise InvalidInputError("user-table metric requires a table")
            table = np.array(self.table, dtype=np.float64)
            table.flags.writeable = False
            object.__setattr__(self, "table", table)
            validate_table(table, self.h)
        elif self.kind == "chaos":
            object.__setattr__(self, "_scores", _chaos_scores(self.h))

    @classmethod
    def discrete(cls, h):
        return cls("discrete", h)

    @classmethod
    def l1(cls, h):
        return cls("l1", h)

    @classmethod
    def chaos(cls, h):
        return cls("chaos", h)

    @classmethod
    def from_table(cls, table, h=None):
        table = np.asarray(table, dtype=np.float64)
        if h is None:
            h = _order_for_size(table.shape[0])
        return cls("user-table", h, table)

    def between(self, a, b) -> np.ndarray:
        """Elementwise distances between index arrays ``a`` and ``b``."""
        a = np.asarray(a)
        b = np.asarray(b)
        if self.kind == "discrete":
            return (a != b).astype(np.float64)
        if self.kind == "l1":
            perms = all_patterns(self.h)
            return np.abs(perms[a] - perms[b]).sum(-1).astype(np.float64)
        if self.kind == "chaos":
            return np.abs(self._scores[a] - self._scores[b])
        return self.table[a, b]

    def pairwise(self, a, b) -> np.ndarray:
        """Distance matrix with rows indexed by ``a`` and columns by ``b``."""
        a = np.asarray(a)[:, None]
        b = np.asarray(b)[None, :]
        if self.kind == "l1":
            perms = all_patterns(self.h)
            out = np.zeros((a.shape[0], b.shape[1]))
            for j in range(self.h + 1):
                out += np.abs(perms[a, j] - perms[b, j])
            return out
        return self.between(a, b)

    def full_table(self) -> np.ndarray:
        idx = np.arange(n_patterns(self.h))
        return self.pairwise(idx, idx)

    def attained_distances(self) -> np.ndarray:
        """Sorted set of values ``d(pi, sigma)`` over all pattern pairs."""
        if self.kind == "discrete":
            return np.array([0.0, 1.0])
        if self.kind == "l1":
            # every even value up to the maximum is attained
            top = ((self.h + 1) ** 2) // 2
            return np.arange(0, top + 1, 2, dtype=np.float64)
        if self.kind == "chaos":
            scores = np.unique(self._scores)
            return np.unique(np.abs(scores[:, None] - scores[None, :]))
        return np.unique(self.table)

    def __call__(self, a: Pattern, b: Pattern) -> float:
        _check_same_order(a, b)
        if a.h != self.h:
            raise InvalidInputError(f"metric is for h={self.h}, got patterns of h={a.h}")
        return float(self.between(pattern_index(a), pattern_index(b)))


def _order_for_size(size: int) -> int:
    h = 1
    while n_patterns(h) < size:
        h += 1
    if n_patterns(h) != size:
        raise InvalidInputError(f"table size {size} is not (h+1)! for any h")
    return h


def validate_table(table: np.ndarray, h: int, rng=None, samples: int = 200_000) -> None:
    """Reject tables violating the pseudo-metric axioms.

    The triangle inequality is checked over all triples for h <= 4 and on
    ``samples`` random triples above that.
    """
    size = n_patterns(h)
    if table.shape != (size, size):
        raise InvalidInputError(f"distance table must be {size}x{size} for h={h}, got {table.shape}")
    if not np.all(np.isfinite(table)) or np.any(table < 0):
        raise InvalidInputError("distances must be finite and nonnegative")
    if np.any(np.diag(table) != 0):
        raise InvalidInputError("distance table must have a zero diagonal")
    if not np.array_equal(table, table.T):
        raise InvalidInputError("distance table must be symmetric")
    tol = 1e-12 * max(1.0, float(table.max()))
    if h <= 4:
        for j in range(size):
            # d(i, j) + d(j, k) >= d(i, k) for all i, k
            if np.any(table[:, j, None] + table[None, j, :] < table - tol):
                raise InvalidInputError("distance table violates the triangle inequality")
    else:
        rng = np.random.default_rng(0) if rng is None else rng
        i, j, k = rng.integers(0, size, size=(3, samples))
        if np.any(table[i, j] + table[j, k] < table[i, k] - tol):
            raise InvalidInputError("distance table violates the triangle inequality")


@dataclass(frozen=True, eq=False)
class WeightFunction:
    """Decreasing map from distances to [0, 1] with ``w(0) = 1``.

    ``step-table`` weights give 0 to any distance not listed in ``steps``.
    """

    kind: str = "indicator-at-zero"
    steps: Mapping[float, float] | None = None
    func: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)
    name: str | None = None

    def __post_init__(self):
        if self.kind not in WEIGHT_KINDS:
            raise InvalidInputError(f"unknown weight kind {self.kind!r}")
        if self.kind == "step-table":
            if not self.steps:
                raise InvalidInputError("step-table weight requires steps")
            steps = {float(k): float(v) for k, v in self.steps.items()}
            if any(k < 0 for k in steps):
                raise InvalidInputError("step distances must be nonnegative")
            if steps.get(0.0) != 1.0:
                raise InvalidInputError("weight at distance 0 must be 1")
            keys = sorted(steps)
            vals = [steps[k] for k in keys]
            if any(not 0.0 <= v <= 1.0 for v in vals):
                raise InvalidInputError("weights must lie in [0, 1]")
            if any(b > a for a, b in zip(vals, vals[1:])):
                raise InvalidInputError("weights must be decreasing in the distance")
            object.__setattr__(self, "steps", steps)
            object.__setattr__(self, "_keys", np.array(keys))
            object.__setattr__(self, "_vals", np.array(vals))
        elif self.kind == "user-function":
            if self.func is None:
                raise InvalidInputError("user-function weight requires func")
            if not np.isclose(float(np.asarray(self.func(np.array([0.0])))[0]), 1.0):
                raise InvalidInputError("weight at distance 0 must be 1")

    @classmethod
    def indicator(cls):
        return cls("indicator-at-zero", name="indicator")

    @classmethod
    def step_table(cls, steps, name=None):
        return cls("step-table", steps=dict(steps), name=name)

    @classmethod
    def from_function(cls, func, name=None):
        return cls("user-function", func=func, name=name)

    def __call__(self, dist):
        d = np.asarray(dist, dtype=np.float64)
        if np.any(d < 0):
            raise InvalidInputError("distances must be nonnegative")
        if self.kind == "indicator-at-zero":
            out = (d == 0).astype(np.float64)
        elif self.kind == "step-table":
            pos = np.clip(np.searchsorted(self._keys, d), 0, len(self._keys) - 1)
            near = np.abs(self._keys[pos] - d) <= _KEY_TOL
            lower = np.clip(pos - 1, 0, None)
            near_lower = np.abs(self._keys[lower] - d) <= _KEY_TOL
            out = np.where(near, self._vals[pos], np.where(near_lower, self._vals[lower], 0.0))
        else:
            out = np.asarray(self.func(d), dtype=np.float64)
        return out if out.ndim else float(out)

    def check_against(self, metric: PatternMetric) -> None:
        """Require range [0, 1] and monotone decrease on the metric's attained distances."""
        dists = metric.attained_distances()
        vals = np.asarray(self(dists), dtype=np.float64)
        if np.any((vals < 0) | (vals > 1)):
            raise InvalidInputError("weights must lie in [0, 1] on attained distances")
        if np.any(np.diff(vals) > 1e-12):
            raise InvalidInputError(
                f"weight is not decreasing on the distances attained by the {metric.kind} metric"
            )


def weight_eval(w: WeightFunction, dist):
    return w(dist)


# ad hoc step weight for the l1 metric: full credit for equal patterns,
# linearly less for each neighboring transposition up to three
L1_STEP_WEIGHTS = {0: 1.0, 2: 0.75, 4: 0.50, 6: 0.25}

WEIGHT_PRESETS = {
    "indicator": WeightFunction.indicator,
    "l1-step": lambda: WeightFunction.step_table(L1_STEP_WEIGHTS, name="l1-step"),
}


def make_metric(kind: str, h: int) -> PatternMetric:
    if kind == "user-table":
        raise InvalidInputError("user-table metrics must be loaded from a file")
    return PatternMetric(kind, h)


def make_weight(name: str) -> WeightFunction:
    try:
        return WEIGHT_PRESETS[name]()
    except KeyError:
        raise InvalidInputError(f"unknown weight preset {name!r}; choose from {sorted(WEIGHT_PRESETS)}")


def load_config(path) -> tuple[int | None, PatternMetric | None, WeightFunction | None]:
    """Read a metric table and/or step weights from a JSON document."""
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInputError(f"cannot read metric/weight file {path}: {exc}") from exc
    h = doc.get("h")
    metric = None
    weight = None
    if "distances" in doc:
        metric = PatternMetric.from_table(doc["distances"], h)
        h = metric.h
    if "weights" in doc:
        weight = WeightFunction.step_table({float(k): v for k, v in doc["weights"].items()},
                                           name=str(path))
    return h, metric, weight


def dump_config(path, metric: PatternMetric | None = None, weight: WeightFunction | None = None):
    doc = {}
    if metric is not None:
        doc["h"] = metric.h
        doc["distances"] = metric.full_table().tolist()
    if weight is not None and weight.kind == "step-table":
        doc["weights"] = {repr(k): v for k, v in weight.steps.items()}
    Path(path).write_text(json.dumps(doc))
