"""Kernel estimates of long-run variances and covariance matrices.

Every estimator here has the form

    (1/n) * sum_{i,j <= m} k((i - j) / b_n) * z_i * z_j'

over the ``m = n - h`` window summands, with the divisor ``n`` matching the
point estimators. Only lags with nonzero kernel weight are visited, so the
cost is O(m * b_n) for compactly supported kernels.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.stats import norm

from .errors import InvalidInputError
from .estimators import PairedSeries, _pair, weight_series
from .metrics import PatternMetric, WeightFunction
from .patterns import check_order, n_patterns, pattern_frequencies

# 2 * 5! = 240 rows; larger orders only via the projected scalar routes
MAX_MATRIX_ORDER = 4


class NegativeVarianceWarning(RuntimeWarning):
    pass


def bartlett(x):
    return np.clip(1.0 - np.abs(x), 0.0, None)


def log_bandwidth(n: int) -> float:
    return math.log(n)


@dataclass(frozen=True)
class KernelConfig:
    """Kernel, bandwidth rule and optional fixed bandwidth.

    ``support`` is the half-width outside which the kernel vanishes; ``None``
    means every lag is evaluated.
    """

    kernel: Callable[[np.ndarray], np.ndarray] = bartlett
    support: float | None = 1.0
    bandwidth_rule: Callable[[int], float] = log_bandwidth
    bandwidth_override: float | None = None
    name: str = "bartlett"

    def __post_init__(self):
        if self.bandwidth_override is not None and not self.bandwidth_override > 0:
            raise InvalidInputError("bandwidth must be positive")
        if not math.isclose(float(np.asarray(self.kernel(np.array([0.0])))[0]), 1.0):
            raise InvalidInputError("kernel must satisfy k(0) = 1")

    def bandwidth(self, n: int) -> float:
        b = self.bandwidth_override if self.bandwidth_override is not None else self.bandwidth_rule(n)
        if not b > 0:
            raise InvalidInputError(f"bandwidth must be positive, got {b} for n={n}")
        return float(b)

    def lag_weights(self, n: int, m: int) -> np.ndarray:
        """``k(l / b_n)`` for lags ``l = 0 .. L`` where ``L`` covers the kernel support."""
        b = self.bandwidth(n)
        top = m - 1 if self.support is None else min(m - 1, int(math.floor(self.support * b)))
        return np.asarray(self.kernel(np.arange(top + 1) / b), dtype=np.float64)

    def describe(self, n: int | None = None) -> dict:
        out = {"kernel": self.name, "bandwidth_override": self.bandwidth_override}
        if n is not None:
            out["bandwidth"] = self.bandwidth(n)
        return out


DEFAULT_KERNEL = KernelConfig()


def _lrv(z: np.ndarray, n: int, cfg: KernelConfig) -> tuple[float, bool]:
    lags = cfg.lag_weights(n, z.size)
    total = lags[0] * np.dot(z, z)
    for l in range(1, lags.size):
        if lags[l] != 0.0:
            total += 2.0 * lags[l] * np.dot(z[:-l], z[l:])
    value = float(total) / n
    if value < 0:
        return 0.0, True
    return value, False


def longrun_variance(z, cfg: KernelConfig | None = None, n: int | None = None) -> float:
    """Kernel long-run variance of an already demeaned summand series ``z``.

    ``n`` is the divisor; it defaults to ``len(z)``. Negative values, only
    possible for kernels that are not positive definite, are clamped to 0
    with a :class:`NegativeVarianceWarning`.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.size < 1:
        raise InvalidInputError("need at least one summand")
    value, clamped = _lrv(z, z.size if n is None else int(n), cfg or DEFAULT_KERNEL)
    if clamped:
        warnings.warn("negative long-run variance clamped to 0", NegativeVarianceWarning, stacklevel=2)
    return value


def sigma2_p(s: PairedSeries, h: int, cfg: KernelConfig | None = None) -> float:
    """Long-run variance of the coincidence indicators around ``p_hat``."""
    s = _pair(s)
    px, py = s.patterns(h)
    ind = (px == py).astype(np.float64)
    return longrun_variance(ind - ind.sum() / s.n, cfg, s.n)


def _check_matrix_order(h: int, allow_large: bool) -> None:
    check_order(h, cap=MAX_MATRIX_ORDER, allow_large=allow_large)


def _stacked(s: PairedSeries, h: int):
    px, py = s.patterns(h)
    k = n_patterns(h)
    q = np.concatenate([pattern_frequencies(px, h, s.n), pattern_frequencies(py, h, s.n)])
    return px, py + k, q, 2 * k


def longrun_cov_matrix(s: PairedSeries, h: int, cfg: KernelConfig | None = None,
                       allow_large: bool = False) -> np.ndarray:
    """Kernel covariance matrix of the stacked demeaned one-hot pattern vectors.

    Rows and columns ``0 .. (h+1)!-1`` belong to x, the rest to y. The
    one-hot structure turns each lag product into a pair count, so no dense
    ``m x 2(h+1)!`` matrix is formed.
    """
    s = _pair(s)
    _check_matrix_order(h, allow_large)
    cfg = cfg or DEFAULT_KERNEL
    u0, u1, q, dim = _stacked(s, h)
    m = u0.size
    lags = cfg.lag_weights(s.n, m)

    def gamma(l):
        head = slice(0, m - l)
        tail = slice(l, m)
        codes = np.concatenate([
            u0[head] * dim + u0[tail], u0[head] * dim + u1[tail],
            u1[head] * dim + u0[tail], u1[head] * dim + u1[tail],
        ])
        pairs = np.bincount(codes, minlength=dim * dim).reshape(dim, dim).astype(np.float64)
        s_head = np.bincount(np.concatenate([u0[head], u1[head]]), minlength=dim)
        s_tail = np.bincount(np.concatenate([u0[tail], u1[tail]]), minlength=dim)
        return pairs - np.outer(s_head, q) - np.outer(q, s_tail) + (m - l) * np.outer(q, q)

    total = lags[0] * gamma(0)
    for l in range(1, lags.size):
        if lags[l] != 0.0:
            g = gamma(l)
            total += lags[l] * (g + g.T)
    total /= s.n
    return 0.5 * (total + total.T)


def gamma2_q(s: PairedSeries, h: int, cfg: KernelConfig | None = None) -> float:
    """Delta-method long-run variance of ``q_hat``.

    Equal to ``g' Sigma g`` with ``g = (q_y, q_x)``; evaluated as the
    long-run variance of the projected scalar series ``g . V_i``.
    """
    s = _pair(s)
    u0, u1, q, dim = _stacked(s, h)
    k = dim // 2
    g = np.concatenate([q[k:], q[:k]])
    z = g[u0] + g[u1] - math.fsum(g * q)
    return longrun_variance(z, cfg, s.n)


def gamma2_q_matrix(s: PairedSeries, h: int, cfg: KernelConfig | None = None,
                    allow_large: bool = False) -> float:
    """Same quantity as :func:`gamma2_q`, via the explicit covariance matrix."""
    s = _pair(s)
    sigma = longrun_cov_matrix(s, h, cfg, allow_large)
    _, _, q, dim = _stacked(s, h)
    k = dim // 2
    g = np.concatenate([q[k:], q[:k]])
    return max(float(g @ sigma @ g), 0.0)


def _awopd_parts(s, h, d, w):
    omega = weight_series(s, h, d, w)
    px, py = s.patterns(h)
    qx = pattern_frequencies(px, h, s.n)
    qy = pattern_frequencies(py, h, s.n)
    return omega, px, py, qx, qy


def _awopd_gradient(qx, qy, d, w):
    """Dense gradient blocks ``(sum_sigma W[pi, sigma] q_y(sigma))_pi`` and its transpose analogue."""
    ix = np.flatnonzero(qx)
    iy = np.flatnonzero(qy)
    weights = np.asarray(w(d.pairwise(ix, iy)), dtype=np.float64)
    grad_x = np.zeros_like(qx)
    grad_y = np.zeros_like(qy)
    grad_x[ix] = weights @ qy[iy]
    grad_y[iy] = qx[ix] @ weights
    return grad_x, grad_y


def awopd_longrun(s: PairedSeries, h: int, d: PatternMetric, w: WeightFunction,
                  cfg: KernelConfig | None = None) -> tuple[float, float]:
    """``(a_hat, gamma2_hat)`` for weighted ordinal pattern dependence.

    ``a_hat`` is the long-run variance of the weight series and scales the
    break statistic; ``gamma2_hat`` is the delta-method variance of ``D_hat``.
    """
    s = _pair(s)
    omega, px, py, qx, qy = _awopd_parts(s, h, d, w)
    centered = omega - omega.sum() / s.n
    a_hat = longrun_variance(centered, cfg, s.n)
    grad_x, grad_y = _awopd_gradient(qx, qy, d, w)
    proj = centered - (grad_x[px] - math.fsum(grad_x * qx)) - (grad_y[py] - math.fsum(grad_y * qy))
    return a_hat, longrun_variance(proj, cfg, s.n)


def awopd_cov_matrix(s: PairedSeries, h: int, d: PatternMetric, w: WeightFunction,
                     cfg: KernelConfig | None = None, allow_large: bool = False) -> np.ndarray:
    """Kernel estimate of the joint covariance of (mean weight, q_x, q_y).

    Row/column 0 is the weight series, followed by the x and y pattern blocks.
    """
    s = _pair(s)
    _check_matrix_order(h, allow_large)
    cfg = cfg or DEFAULT_KERNEL
    omega, _, _, _, _ = _awopd_parts(s, h, d, w)
    u0, u1, q, dim = _stacked(s, h)
    m = u0.size
    centered = omega - omega.sum() / s.n
    lags = cfg.lag_weights(s.n, m)

    def cross(l):
        # sum_i centered[i] * V[i + l] and sum_i V[i] * centered[i + l]
        head = slice(0, m - l)
        tail = slice(l, m)
        fwd = (np.bincount(u0[tail], weights=centered[head], minlength=dim)
               + np.bincount(u1[tail], weights=centered[head], minlength=dim)
               - centered[head].sum() * q)
        bwd = (np.bincount(u0[head], weights=centered[tail], minlength=dim)
               + np.bincount(u1[head], weights=centered[tail], minlength=dim)
               - centered[tail].sum() * q)
        return fwd, bwd

    b = np.zeros(dim)
    for l in range(lags.size):
        if lags[l] == 0.0:
            continue
        fwd, bwd = cross(l)
        b += lags[l] * (fwd if l == 0 else fwd + bwd)
    b /= s.n

    out = np.empty((dim + 1, dim + 1))
    out[0, 0] = longrun_variance(centered, cfg, s.n)
    out[0, 1:] = b
    out[1:, 0] = b
    out[1:, 1:] = longrun_cov_matrix(s, h, cfg, allow_large)
    return out


def awopd_gamma2_matrix(s: PairedSeries, h: int, d: PatternMetric, w: WeightFunction,
                        cfg: KernelConfig | None = None, allow_large: bool = False) -> float:
    s = _pair(s)
    sigma = awopd_cov_matrix(s, h, d, w, cfg, allow_large)
    _, _, _, qx, qy = _awopd_parts(s, h, d, w)
    grad_x, grad_y = _awopd_gradient(qx, qy, d, w)
    alpha = np.concatenate([[1.0], -grad_x, -grad_y])
    return max(float(alpha @ sigma @ alpha), 0.0)


@dataclass
class LongRunEstimates:
    sigma2: float
    sigma_matrix: np.ndarray | None = field(default=None, repr=False)
    gamma2_q: float | None = None
    awopd_a: float | None = None
    awopd_gamma2: float | None = None
    warnings: list[str] = field(default_factory=list)


def estimate_longrun(s: PairedSeries, h: int, cfg: KernelConfig | None = None,
                     d: PatternMetric | None = None, w: WeightFunction | None = None,
                     with_matrix: bool = False) -> LongRunEstimates:
    s = _pair(s)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", NegativeVarianceWarning)
        out = LongRunEstimates(sigma2=sigma2_p(s, h, cfg), gamma2_q=gamma2_q(s, h, cfg))
        if with_matrix:
            out.sigma_matrix = longrun_cov_matrix(s, h, cfg)
        if d is not None and w is not None:
            out.awopd_a, out.awopd_gamma2 = awopd_longrun(s, h, d, w, cfg)
    out.warnings = [str(c.message) for c in caught if issubclass(c.category, NegativeVarianceWarning)]
    return out


def confidence_interval(estimate: float, longrun_var: float, n: int, level: float = 0.05) -> tuple[float, float]:
    """Two-sided interval ``estimate +- z_{level/2} * sqrt(longrun_var / n)``."""
    if not 0 < level < 1:
        raise InvalidInputError("level must lie in (0, 1)")
    half = norm.ppf(1 - level / 2) * math.sqrt(longrun_var / n)
    return estimate - half, estimate + half
