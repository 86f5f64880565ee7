"""CUSUM tests for a structural break in ordinal pattern dependence.

Both tests take the maximum absolute partial sum of a demeaned window
series, scaled by ``sqrt(n)`` and a kernel long-run standard deviation. Under
no change the studentized maximum follows the Kolmogorov law, the law of the
supremum of a Brownian bridge.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateVarianceError, InvalidInputError
from .estimators import PairedSeries, _pair, weight_series
from .longrun import DEFAULT_KERNEL, KernelConfig, longrun_variance
from .metrics import PatternMetric, WeightFunction

# beyond this the alternating series needs many terms; use the theta form
_SMALL_X = 1.18


@dataclass(frozen=True)
class KolmogorovDist:
    truncation: int = 10

    def __post_init__(self):
        if self.truncation < 10:
            raise InvalidInputError("truncation must be at least 10 terms")

    def cdf(self, x: float) -> float:
        return kolmogorov_cdf(x, self)

    def sf(self, x: float) -> float:
        return kolmogorov_sf(x, self)

    def quantile(self, alpha: float) -> float:
        return kolmogorov_quantile(alpha, self)


KOLMOGOROV = KolmogorovDist()


def _theta_cdf(x: float, terms: int) -> float:
    # K(x) = sqrt(2 pi)/x * sum_k exp(-(2k-1)^2 pi^2 / (8 x^2))
    c = math.pi ** 2 / (8.0 * x * x)
    total = 0.0
    for k in range(1, terms + 1):
        total += math.exp(-((2 * k - 1) ** 2) * c)
    return math.sqrt(2.0 * math.pi) / x * total


def kolmogorov_sf(x: float, dist: KolmogorovDist = KOLMOGOROV) -> float:
    """Upper tail ``1 - K(x)`` without cancellation for large ``x``."""
    if x <= 0:
        return 1.0
    if x < _SMALL_X:
        return 1.0 - _theta_cdf(x, dist.truncation)
    total = 0.0
    for k in range(1, dist.truncation + 1):
        total += (-1) ** (k - 1) * math.exp(-2.0 * k * k * x * x)
    return min(max(2.0 * total, 0.0), 1.0)


def kolmogorov_cdf(x: float, dist: KolmogorovDist = KOLMOGOROV) -> float:
    """``K(x) = 1 - 2 sum_{k>=1} (-1)^(k-1) exp(-2 k^2 x^2)`` for ``x > 0``, else 0."""
    if x <= 0:
        return 0.0
    if x < _SMALL_X:
        return min(_theta_cdf(x, dist.truncation), 1.0)
    return 1.0 - kolmogorov_sf(x, dist)


def kolmogorov_quantile(alpha: float, dist: KolmogorovDist = KOLMOGOROV) -> float:
    """The point with upper tail mass ``alpha``, by bisection on [0.1, 5]."""
    if not 0 < alpha < 1:
        raise InvalidInputError("alpha must lie in (0, 1)")
    lo, hi = 0.1, 5.0
    target = 1.0 - alpha
    while hi - lo > 1e-10:
        mid = 0.5 * (lo + hi)
        if kolmogorov_cdf(mid, dist) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass
class BreakTestResult:
    statistic: float
    raw_statistic: float
    trajectory: np.ndarray = field(repr=False)
    critical_value: float
    p_value: float
    reject: bool
    argmax_k: int
    level: float
    scale: float
    n: int
    h: int
    kind: str = "T"

    def as_dict(self, with_trajectory: bool = False) -> dict:
        out = {
            "kind": self.kind,
            "statistic": self.statistic,
            "raw_statistic": self.raw_statistic,
            "scale": self.scale,
            "critical_value": self.critical_value,
            "p_value": self.p_value,
            "reject": self.reject,
            "argmax_k": self.argmax_k,
            "level": self.level,
            "n": self.n,
            "h": self.h,
        }
        if with_trajectory:
            out["trajectory"] = self.trajectory.tolist()
        return out

    def write_trajectory_csv(self, path, timestamps=None) -> None:
        """Rows ``k, value`` (plus the window start date when given)."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "value"] + (["date"] if timestamps is not None else []))
            for k, v in enumerate(self.trajectory, start=1):
                row = [k, repr(float(v))]
                if timestamps is not None:
                    row.append(timestamps[k - 1])
                writer.writerow(row)

    def write_trajectory_json(self, path) -> None:
        doc = {
            "critical_value": self.critical_value,
            "level": self.level,
            "statistic": self.statistic,
            "argmax_k": self.argmax_k,
            "k": list(range(1, self.trajectory.size + 1)),
            "value": self.trajectory.tolist(),
        }
        Path(path).write_text(json.dumps(doc))


def cusum_trajectory(z, mean: float, n: int, scale: float = 1.0, absolute: bool = True) -> np.ndarray:
    """``|sum_{i<=k} (z_i - mean)| / (sqrt(n) * scale)`` for ``k = 1 .. m``."""
    z = np.asarray(z, dtype=np.float64)
    if z.size < 1:
        raise InvalidInputError("need at least one summand")
    if scale == 0:
        raise DegenerateVarianceError("scale is zero; the summand series is constant")
    if not scale > 0:
        raise InvalidInputError("scale must be positive")
    partial = np.cumsum(z - mean)
    if absolute:
        partial = np.abs(partial)
    return partial / (math.sqrt(n) * scale)


def _cusum_test(values: np.ndarray, n: int, h: int, cfg: KernelConfig, level: float,
                dist: KolmogorovDist, kind: str, absolute: bool = True) -> BreakTestResult:
    if not 0 < level < 1:
        raise InvalidInputError("level must lie in (0, 1)")
    if n <= h + 1:
        raise InvalidInputError(f"need n > h + 1 observations, got n={n}, h={h}")
    mean = values.sum() / n
    raw = cusum_trajectory(values, mean, n, 1.0, absolute)
    raw_stat = max(float(raw.max()), 0.0)
    if values.min() == values.max():
        raise DegenerateVarianceError(
            f"the {kind} summand series is constant; the test is vacuous", raw_statistic=raw_stat
        )
    var = longrun_variance(values - mean, cfg, n)
    if var <= 0:
        raise DegenerateVarianceError("estimated long-run variance is zero", raw_statistic=raw_stat)
    scale = math.sqrt(var)
    traj = raw / scale
    k = int(np.argmax(traj))
    stat = max(float(traj[k]), 0.0)
    crit = kolmogorov_quantile(level, dist)
    return BreakTestResult(
        statistic=stat,
        raw_statistic=raw_stat,
        trajectory=traj,
        critical_value=crit,
        p_value=kolmogorov_sf(stat, dist),
        reject=stat >= crit,
        argmax_k=k + 1,
        level=level,
        scale=scale,
        n=n,
        h=h,
        kind=kind,
    )


def t_statistic(s: PairedSeries, h: int, cfg: KernelConfig | None = None, level: float = 0.05,
                dist: KolmogorovDist = KOLMOGOROV) -> BreakTestResult:
    """Studentized CUSUM test on the coincidence indicators.

    To test the reflected (negative dependence) channel pass ``s.negated()``.
    """
    s = _pair(s)
    px, py = s.patterns(h)
    ind = (px == py).astype(np.float64)
    return _cusum_test(ind, s.n, h, cfg or DEFAULT_KERNEL, level, dist, "T")


def w_statistic(s: PairedSeries, h: int, d: PatternMetric, w: WeightFunction,
                cfg: KernelConfig | None = None, level: float = 0.05,
                dist: KolmogorovDist = KOLMOGOROV, absolute: bool = True) -> BreakTestResult:
    """Studentized CUSUM test on the weight series ``w(d(., .))``.

    ``absolute=False`` gives the one-sided variant taking the maximum of the
    signed partial sums (and 0 for the empty sum).
    """
    s = _pair(s)
    w.check_against(d)
    values = weight_series(s, h, d, w)
    return _cusum_test(values, s.n, h, cfg or DEFAULT_KERNEL, level, dist, "W", absolute)
