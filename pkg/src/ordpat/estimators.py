"""Point estimators of ordinal pattern dependence.

All relative frequencies here divide by the series length ``n`` although only
``n - h`` windows exist, so ``p_hat`` of two identical series is
``(n - h) / n``. The AWOPD-value / comparison-value pair is the exception: its
comparison value uses pattern frequencies renormalized to sum to one, so it
reads as the expected weight total under independence.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .errors import InvalidInputError
from .metrics import PatternMetric, WeightFunction
from .patterns import as_series, n_patterns, pattern_frequencies, pattern_sequence


@dataclass(frozen=True, eq=False)
class PairedSeries:
    x: np.ndarray
    y: np.ndarray
    timestamps: Sequence[str] | None = None
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        x = as_series(self.x, "x")
        y = as_series(self.y, "y")
        if x.size != y.size:
            raise InvalidInputError(f"series lengths differ: {x.size} vs {y.size}")
        if self.timestamps is not None and len(self.timestamps) != x.size:
            raise InvalidInputError("timestamps must match the series length")
        x.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "_cache", {})

    @property
    def n(self) -> int:
        return self.x.size

    def __len__(self):
        return self.x.size

    def patterns(self, h: int, allow_large: bool = False) -> tuple[np.ndarray, np.ndarray]:
        """Pattern index sequences of x and y, computed once per order."""
        key = (h, allow_large)
        if key not in self._cache:
            if self.n <= h:
                raise InvalidInputError(f"need more than h={h} observations, got n={self.n}")
            self._cache[key] = (
                pattern_sequence(self.x, h, allow_large),
                pattern_sequence(self.y, h, allow_large),
            )
        return self._cache[key]

    def negated(self) -> "PairedSeries":
        """The pair (X, -Y), which turns reflected coincidences into coincidences."""
        meta = dict(self.metadata, negated_y=not self.metadata.get("negated_y", False))
        return PairedSeries(self.x, -self.y, self.timestamps, meta)

    def slice(self, start: int, stop: int) -> "PairedSeries":
        ts = None if self.timestamps is None else list(self.timestamps)[start:stop]
        return PairedSeries(self.x[start:stop], self.y[start:stop], ts, dict(self.metadata))


def _pair(s) -> PairedSeries:
    return s if isinstance(s, PairedSeries) else PairedSeries(*s)


@dataclass
class DependenceEstimates:
    h: int
    n: int
    p_hat: float
    q_hat: float
    r_hat: float
    s_hat: float
    ord_hat: float
    q_x: np.ndarray = field(repr=False)
    q_y: np.ndarray = field(repr=False)
    se_p: float | None = None
    se_q: float | None = None

    def as_dict(self) -> dict:
        return {
            "h": self.h,
            "n": self.n,
            "p_hat": self.p_hat,
            "q_hat": self.q_hat,
            "r_hat": self.r_hat,
            "s_hat": self.s_hat,
            "ord_hat": self.ord_hat,
            "se_p": self.se_p,
            "se_q": self.se_q,
        }


@dataclass
class AwopdEstimate:
    awopd_value: float
    comparison_value: float
    d_hat: float
    coincidences: int
    classical_comparison: float
    metric: PatternMetric = field(repr=False)
    weight: WeightFunction = field(repr=False)
    # comparison values use marginals renormalized to sum to one
    normalization: str = "probability"

    def as_dict(self) -> dict:
        return {
            "awopd_value": self.awopd_value,
            "comparison_value": self.comparison_value,
            "d_hat": self.d_hat,
            "coincidences": self.coincidences,
            "classical_comparison": self.classical_comparison,
            "metric": self.metric.kind,
            "weight": self.weight.name or self.weight.kind,
            "comparison_normalization": self.normalization,
        }


def coincidence_indicators(s: PairedSeries, h: int) -> np.ndarray:
    px, py = _pair(s).patterns(h)
    return (px == py).astype(np.float64)


def estimate_p(s: PairedSeries, h: int) -> float:
    s = _pair(s)
    px, py = s.patterns(h)
    return np.count_nonzero(px == py) / s.n


def estimate_q_marginals(series, h: int) -> np.ndarray:
    x = as_series(series)
    return pattern_frequencies(pattern_sequence(x, h), h, x.size)


def _marginals(s: PairedSeries, h: int) -> tuple[np.ndarray, np.ndarray]:
    px, py = s.patterns(h)
    return pattern_frequencies(px, h, s.n), pattern_frequencies(py, h, s.n)


def _inner(qx: np.ndarray, qy: np.ndarray) -> float:
    both = np.flatnonzero((qx > 0) & (qy > 0))
    # exactly rounded, so the weighted path below reproduces it bit for bit
    return math.fsum(qx[both] * qy[both])


def estimate_q(s: PairedSeries, h: int) -> float:
    return _inner(*_marginals(_pair(s), h))


def estimate_r(s: PairedSeries, h: int) -> float:
    return estimate_p(_pair(s).negated(), h)


def estimate_s(s: PairedSeries, h: int) -> float:
    return estimate_q(_pair(s).negated(), h)


def ord_coefficient(p: float, q: float, r: float, s: float) -> float:
    """Standardized coefficient ``((p-q)/(1-q))^+ - ((r-s)/(1-s))^+``.

    A term whose independence benchmark equals one is set to one: both
    series then show a single pattern, i.e. perfect co-movement.
    """
    for name, v in (("p", p), ("q", q), ("r", r), ("s", s)):
        if not 0.0 <= v <= 1.0:
            raise InvalidInputError(f"{name}={v} is outside [0, 1]")
    pos = 1.0 if q == 1.0 else max((p - q) / (1.0 - q), 0.0)
    neg = 1.0 if s == 1.0 else max((r - s) / (1.0 - s), 0.0)
    return pos - neg


def estimate_dependence(s: PairedSeries, h: int, cfg=None, with_se: bool = True) -> DependenceEstimates:
    """All point estimates for one order, with kernel standard errors if requested."""
    s = _pair(s)
    qx, qy = _marginals(s, h)
    p_hat = estimate_p(s, h)
    q_hat = _inner(qx, qy)
    r_hat = estimate_r(s, h)
    s_hat = estimate_s(s, h)
    est = DependenceEstimates(
        h=h, n=s.n, p_hat=p_hat, q_hat=q_hat, r_hat=r_hat, s_hat=s_hat,
        ord_hat=ord_coefficient(p_hat, q_hat, r_hat, s_hat), q_x=qx, q_y=qy,
    )
    if with_se:
        from . import longrun

        cfg = cfg or longrun.KernelConfig()
        est.se_p = float(np.sqrt(longrun.sigma2_p(s, h, cfg) / s.n))
        est.se_q = float(np.sqrt(longrun.gamma2_q(s, h, cfg) / s.n))
    return est


def weight_series(s: PairedSeries, h: int, d: PatternMetric, w: WeightFunction) -> np.ndarray:
    """``w(d(pattern of x window i, pattern of y window i))`` for every window."""
    if d.h != h:
        raise InvalidInputError(f"metric is defined for h={d.h}, analysis uses h={h}")
    px, py = _pair(s).patterns(h)
    return np.asarray(w(d.between(px, py)), dtype=np.float64)


def awopd_value(s: PairedSeries, h: int, d: PatternMetric, w: WeightFunction) -> float:
    return float(weight_series(s, h, d, w).sum())


def _expected_weight(qx: np.ndarray, qy: np.ndarray, d: PatternMetric, w: WeightFunction) -> float:
    """``sum_{pi, sigma} w(d(pi, sigma)) qx(pi) qy(sigma)`` over the supports."""
    ix = np.flatnonzero(qx)
    iy = np.flatnonzero(qy)
    weights = np.asarray(w(d.pairwise(ix, iy)), dtype=np.float64)
    return math.fsum((qx[ix, None] * weights * qy[None, iy]).ravel())


def comparison_value(s: PairedSeries, h: int, d: PatternMetric, w: WeightFunction) -> float:
    s = _pair(s)
    if d.h != h:
        raise InvalidInputError(f"metric is defined for h={d.h}, analysis uses h={h}")
    qx, qy = _marginals(s, h)
    m = s.n - h
    # renormalize n-denominator frequencies to probability vectors
    scale = s.n / m
    return m * _expected_weight(qx * scale, qy * scale, d, w)


def estimate_awopd(s: PairedSeries, h: int, d: PatternMetric, w: WeightFunction) -> AwopdEstimate:
    s = _pair(s)
    w.check_against(d)
    series = weight_series(s, h, d, w)
    qx, qy = _marginals(s, h)
    d_hat = series.sum() / s.n - _expected_weight(qx, qy, d, w)
    px, py = s.patterns(h)
    m = s.n - h
    scale = s.n / m
    return AwopdEstimate(
        awopd_value=float(series.sum()),
        comparison_value=m * _expected_weight(qx * scale, qy * scale, d, w),
        d_hat=float(d_hat),
        coincidences=int(np.count_nonzero(px == py)),
        classical_comparison=m * _inner(qx * scale, qy * scale),
        metric=d,
        weight=w,
    )


__all__ = [
    "AwopdEstimate", "DependenceEstimates", "PairedSeries", "awopd_value", "coincidence_indicators",
    "comparison_value", "estimate_awopd", "estimate_dependence", "estimate_p", "estimate_q",
    "estimate_q_marginals", "estimate_r", "estimate_s", "n_patterns", "ord_coefficient",
    "weight_series",
]
