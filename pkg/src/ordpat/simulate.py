"""Monte Carlo generators and experiment drivers.

Pairs of AR(1) series are coupled through their innovations: with ``eps`` and
``eps'`` independent draws from the innovation law,

    X_t = phi * X_{t-1} + eps_t
    Y_t = phi * Y_{t-1} + rho * eps_t + sqrt(1 - rho^2) * eps'_t

For Student-t and Cauchy laws ``rho`` is a mixing weight rather than a
correlation, so experiments are parameterized by the coincidence probability
``p`` and ``rho`` is found by :func:`calibrate_rho`.

Random streams: a study with master seed ``s`` gives replication ``r`` of
cell ``c`` the generator ``PCG64(SeedSequence(s, spawn_key=(c, r)))``, so
results do not depend on how replications are spread over workers.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats
from scipy.signal import lfilter

from . import __version__
from .breaktest import KOLMOGOROV, kolmogorov_cdf, t_statistic
from .errors import CalibrationRangeError, DegenerateVarianceError, InvalidInputError
from .estimators import PairedSeries
from .longrun import DEFAULT_KERNEL, KernelConfig, longrun_variance, sigma2_p
from .patterns import pattern_sequence

log = logging.getLogger(__name__)

INNOVATIONS = ("gaussian", "student_t", "cauchy")
CALIBRATION_TABLE = Path(__file__).with_name("data") / "calibration.csv"
CALIBRATION_VERSION = 1


@dataclass(frozen=True)
class Ar1PairConfig:
    phi: float = 0.2
    rho: float = 0.0
    innovation: str = "gaussian"
    n: int = 1000
    df: float = 2.0
    burn_in: int = 1000
    seed: int = 0

    def __post_init__(self):
        if not -1 < self.phi < 1:
            raise InvalidInputError(f"AR coefficient must satisfy |phi| < 1, got {self.phi}")
        if not -1 <= self.rho <= 1:
            raise InvalidInputError(f"rho must lie in [-1, 1], got {self.rho}")
        if self.innovation not in INNOVATIONS:
            raise InvalidInputError(f"innovation must be one of {INNOVATIONS}")
        if self.innovation == "student_t" and not self.df > 0:
            raise InvalidInputError("degrees of freedom must be positive")
        if self.n < 1 or self.burn_in < 0:
            raise InvalidInputError("n must be positive and burn_in nonnegative")


@dataclass(frozen=True)
class BreakSpec:
    """Regime switch at 1-based position ``change_at`` (first post-break index)."""

    change_at: int
    rho: float
    phi: float | None = None


def make_rng(seed, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=tuple(key))))


def _draw(rng: np.random.Generator, cfg: Ar1PairConfig, size: int) -> np.ndarray:
    if cfg.innovation == "gaussian":
        return rng.standard_normal(size)
    if cfg.innovation == "student_t":
        return rng.standard_t(cfg.df, size)
    return rng.standard_cauchy(size)


def _ar_filter(eps: np.ndarray, phi: float, split: int | None = None, phi_post: float | None = None):
    if split is None or phi_post is None or phi_post == phi:
        return lfilter([1.0], [1.0, -phi], eps)
    head = lfilter([1.0], [1.0, -phi], eps[:split])
    last = head[-1] if split > 0 else 0.0
    tail, _ = lfilter([1.0], [1.0, -phi_post], eps[split:], zi=[phi_post * last])
    return np.concatenate([head, tail])


def _simulate(cfg: Ar1PairConfig, brk: BreakSpec | None, rng) -> PairedSeries:
    total = cfg.burn_in + cfg.n
    eps = _draw(rng, cfg, total)
    other = _draw(rng, cfg, total)
    rho = np.full(total, float(cfg.rho))
    split = None
    if brk is not None:
        if not 1 < brk.change_at <= cfg.n:
            raise InvalidInputError(f"change_at must lie in (1, n], got {brk.change_at}")
        if not -1 <= brk.rho <= 1:
            raise InvalidInputError("post-break rho must lie in [-1, 1]")
        if brk.phi is not None and not -1 < brk.phi < 1:
            raise InvalidInputError("post-break phi must satisfy |phi| < 1")
        split = cfg.burn_in + brk.change_at - 1
        rho[split:] = brk.rho
    eta = rho * eps + np.sqrt(1.0 - rho * rho) * other
    phi_post = None if brk is None else brk.phi
    x = _ar_filter(eps, cfg.phi, split, phi_post)[cfg.burn_in:]
    y = _ar_filter(eta, cfg.phi, split, phi_post)[cfg.burn_in:]
    return PairedSeries(x, y, metadata={"generator": "ar1_pair"})


def gen_ar1_pair(cfg: Ar1PairConfig, rng: np.random.Generator | None = None) -> PairedSeries:
    return _simulate(cfg, None, make_rng(cfg.seed) if rng is None else rng)


def gen_with_break(cfg: Ar1PairConfig, brk: BreakSpec, rng: np.random.Generator | None = None) -> PairedSeries:
    """Like :func:`gen_ar1_pair` but switching coupling (and optionally phi) at ``brk.change_at``.

    The AR state carries over the break, and with ``brk.rho == cfg.rho`` the
    path equals the one from :func:`gen_ar1_pair` for the same seed.
    """
    return _simulate(cfg, brk, make_rng(cfg.seed) if rng is None else rng)


# --- calibration -------------------------------------------------------------

@dataclass(frozen=True)
class Calibration:
    phi: float
    innovation: str
    df: float
    h: int
    target_p: float
    rho: float
    achieved_p: float
    se: float
    windows: int
    seed: int
    version: int = CALIBRATION_VERSION


class _CouplingCurve:
    """Coincidence frequency as a function of rho on fixed innovation draws."""

    def __init__(self, phi, innovation, h, df, windows, seed, burn_in=1000):
        self.cfg = Ar1PairConfig(phi=phi, innovation=innovation, df=df, n=windows + h,
                                 burn_in=burn_in, seed=seed)
        rng = make_rng(seed)
        total = burn_in + windows + h
        self.eps = _draw(rng, self.cfg, total)
        self.other = _draw(rng, self.cfg, total)
        self.h = h
        self.windows = windows
        self.px = pattern_sequence(lfilter([1.0], [1.0, -phi], self.eps)[burn_in:], h)

    def indicators(self, rho: float) -> np.ndarray:
        eta = rho * self.eps + math.sqrt(1.0 - rho * rho) * self.other
        y = lfilter([1.0], [1.0, -self.cfg.phi], eta)[self.cfg.burn_in:]
        return self.px == pattern_sequence(y, self.h)

    def __call__(self, rho: float) -> float:
        return np.count_nonzero(self.indicators(rho)) / self.windows


def calibrate_rho(phi: float, innovation: str, h: int, target_p: float, df: float = 2.0,
                  windows: int = 1_000_000, seed: int = 20140601, tol: float = 5e-4,
                  cfg: KernelConfig | None = None) -> Calibration:
    """Coupling ``rho`` in [0, 1] at which the coincidence probability equals ``target_p``.

    ``p(rho)`` is the coincidence frequency over ``windows`` windows of one
    long simulated pair. All evaluations reuse the same innovation draws, so
    the bisection runs on a fixed, essentially monotone function.
    """
    curve = _CouplingCurve(phi, innovation, h, df, windows, seed)
    p0, p1 = curve(0.0), curve(1.0)
    if not p0 - tol <= target_p <= p1 + tol:
        raise CalibrationRangeError(
            f"target p={target_p} is outside the achievable range [{p0:.4f}, {p1:.4f}] "
            f"for phi={phi}, {innovation}, h={h}",
            achievable=(p0, p1),
        )
    if abs(target_p - p1) < tol:
        rho = 1.0
    elif abs(target_p - p0) < tol:
        rho = 0.0
    else:
        lo, hi = 0.0, 1.0
        while hi - lo > 1e-7:
            mid = 0.5 * (lo + hi)
            if curve(mid) < target_p:
                lo = mid
            else:
                hi = mid
        rho = hi
    ind = curve.indicators(rho).astype(np.float64)
    achieved = ind.mean()
    if abs(achieved - target_p) >= tol:
        raise CalibrationRangeError(
            f"bisection ended at p={achieved:.5f}, not within {tol} of {target_p}", achievable=(p0, p1)
        )
    se = math.sqrt(longrun_variance(ind - achieved, cfg or DEFAULT_KERNEL) / windows)
    return Calibration(phi=phi, innovation=innovation, df=df, h=h, target_p=target_p, rho=rho,
                       achieved_p=float(achieved), se=se, windows=windows, seed=seed)


_FIELDS = [f for f in Calibration.__dataclass_fields__]


def load_calibration_table(path=None) -> list[Calibration]:
    path = Path(path or CALIBRATION_TABLE)
    if not path.exists():
        return []
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(Calibration(
                phi=float(row["phi"]), innovation=row["innovation"], df=float(row["df"]),
                h=int(row["h"]), target_p=float(row["target_p"]), rho=float(row["rho"]),
                achieved_p=float(row["achieved_p"]), se=float(row["se"]),
                windows=int(row["windows"]), seed=int(row["seed"]), version=int(row["version"]),
            ))
    return out


def save_calibration(entry: Calibration, path=None) -> None:
    """Insert or replace the row for ``entry``'s (phi, law, df, h, target)."""
    path = Path(path or CALIBRATION_TABLE)
    rows = [c for c in load_calibration_table(path) if _key(c) != _key(entry)]
    rows.append(entry)
    rows.sort(key=_key)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=_FIELDS)
        writer.writeheader()
        for c in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in asdict(c).items()})


def _key(c: Calibration):
    df = c.df if c.innovation == "student_t" else 0.0
    return (round(c.phi, 10), c.innovation, round(df, 10), c.h, round(c.target_p, 10))


_calibration_cache: dict = {}


def calibrated_rho(phi: float, innovation: str, h: int, target_p: float, df: float = 2.0,
                   windows: int = 1_000_000, table=None) -> float:
    """Look ``rho`` up in the calibration table, calibrating on a miss."""
    probe = Calibration(phi, innovation, df, h, target_p, 0.0, 0.0, 0.0, 0, 0)
    key = _key(probe)
    if key in _calibration_cache:
        return _calibration_cache[key]
    for c in load_calibration_table(table):
        if _key(c) == key:
            _calibration_cache[key] = c.rho
            return c.rho
    log.info("calibrating rho for %s", key)
    rho = calibrate_rho(phi, innovation, h, target_p, df=df, windows=windows).rho
    _calibration_cache[key] = rho
    return rho


# --- studies -------------------------------------------------------------------

STUDY_KINDS = ("null_size", "power_curve", "power_table", "clt_check")


@dataclass
class StudyParams:
    kind: str = "null_size"
    n_values: Sequence[int] = (1000,)
    h: int = 2
    reps: int = 1000
    level: float = 0.05
    phi: float = 0.2
    innovations: Sequence[str] = ("gaussian",)
    df: float = 2.0
    p_pre: float | None = 0.635
    p_post: float = 0.437
    break_fractions: Sequence[float] = (0.25, 1 / 3, 0.5)
    post_grid: Sequence[float] = (0.6353, 0.6, 0.55, 0.5378, 0.5, 0.45, 0.4)
    bandwidth: float | None = None
    master_seed: int = 2016
    calibration_windows: int = 1_000_000

    def __post_init__(self):
        if self.kind not in STUDY_KINDS:
            raise InvalidInputError(f"study kind must be one of {STUDY_KINDS}")
        if self.reps < 1:
            raise InvalidInputError("reps must be positive")
        for law in self.innovations:
            if law not in INNOVATIONS:
                raise InvalidInputError(f"unknown innovation {law!r}")
        if any(n <= self.h + 1 for n in self.n_values):
            raise InvalidInputError("every n must exceed h + 1")

    def as_dict(self) -> dict:
        out = asdict(self)
        for k, v in out.items():
            if isinstance(v, tuple):
                out[k] = list(v)
        return out


@dataclass
class StudyCell:
    params: dict
    reps: int
    rejections: int
    degenerate: int
    rate: float
    se: float
    runtime: float = 0.0
    extra: dict = field(default_factory=dict)
    samples: np.ndarray | None = field(default=None, repr=False)

    def row(self) -> dict:
        out = dict(self.params)
        out.update(reps=self.reps, rejections=self.rejections, degenerate=self.degenerate,
                   rate=self.rate, se=self.se)
        out.update(self.extra)
        out["runtime"] = self.runtime
        return out


@dataclass
class StudyReport:
    kind: str
    params: dict
    cells: list[StudyCell]
    version: str = __version__

    def results(self) -> list[dict]:
        """Cell rows without timing, for reproducibility comparisons."""
        rows = []
        for c in self.cells:
            row = c.row()
            row.pop("runtime")
            rows.append(row)
        return rows

    def to_json(self) -> str:
        return json.dumps({"kind": self.kind, "version": self.version, "config": self.params,
                           "cells": [c.row() for c in self.cells]}, indent=2)

    def write_csv(self, path) -> None:
        rows = [c.row() for c in self.cells]
        names = []
        for r in rows:
            names += [k for k in r if k not in names]
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=names)
            writer.writeheader()
            writer.writerows(rows)


def worker_count(requested: int | None = None) -> int:
    n = requested or os.cpu_count() or 1
    cap = os.environ.get("ORDPAT_THREADS")
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise InvalidInputError(f"ORDPAT_THREADS must be an integer, got {cap!r}")
    return max(1, n)


@dataclass(frozen=True)
class _Task:
    cell: int
    rep: int
    seed: int
    n: int
    h: int
    phi: float
    innovation: str
    df: float
    rho: float
    level: float
    bandwidth: float | None
    change_at: int | None = None
    rho_post: float | None = None
    p_true: float | None = None


def _run_task(task: _Task) -> tuple[float, float, bool]:
    """One replication: (studentized statistic or z-score, auxiliary value, reject)."""
    rng = make_rng(task.seed, task.cell, task.rep)
    cfg = Ar1PairConfig(phi=task.phi, rho=task.rho, innovation=task.innovation, n=task.n, df=task.df)
    if task.change_at is None:
        pair = gen_ar1_pair(cfg, rng)
    else:
        pair = gen_with_break(cfg, BreakSpec(task.change_at, task.rho_post), rng)
    kernel = KernelConfig(bandwidth_override=task.bandwidth)
    if task.p_true is not None:
        px, py = pair.patterns(task.h)
        p_hat = np.count_nonzero(px == py) / pair.n
        sigma = math.sqrt(sigma2_p(pair, task.h, kernel))
        if sigma == 0:
            return math.nan, p_hat, False
        return math.sqrt(pair.n) * (p_hat - task.p_true) / sigma, p_hat, False
    try:
        res = t_statistic(pair, task.h, kernel, task.level)
    except DegenerateVarianceError:
        return math.nan, math.nan, False
    return res.statistic, res.p_value, res.reject


def _execute(tasks: list[_Task], workers: int) -> list[tuple[float, float, bool]]:
    if workers <= 1 or len(tasks) < 2:
        return [_run_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (8 * workers))))


def _cells(params: StudyParams):
    """Yield (cell params, rho, change_at, rho_post, p_true) in a fixed order."""
    rho_of = lambda law, p: calibrated_rho(params.phi, law, params.h, p, params.df,  # noqa: E731
                                           params.calibration_windows)
    if params.kind == "null_size":
        for law in params.innovations:
            rho = 0.0 if params.p_pre is None else rho_of(law, params.p_pre)
            for n in params.n_values:
                yield {"innovation": law, "n": n, "p": params.p_pre}, rho, None, None, None
    elif params.kind == "clt_check":
        for law in params.innovations:
            p = 0.6353 if params.p_pre is None else params.p_pre
            rho = rho_of(law, p)
            for n in params.n_values:
                yield {"innovation": law, "n": n, "p": p}, rho, None, None, p
    elif params.kind == "power_table":
        for law in params.innovations:
            pre, post = rho_of(law, params.p_pre), rho_of(law, params.p_post)
            for n in params.n_values:
                for frac in params.break_fractions:
                    brk = int(round(n * frac))
                    yield ({"innovation": law, "n": n, "break": brk, "p_pre": params.p_pre,
                            "p_post": params.p_post}, pre, brk + 1, post, None)
    else:
        for law in params.innovations:
            pre = rho_of(law, params.p_pre)
            for n in params.n_values:
                brk = n // 2
                for p_post in params.post_grid:
                    yield ({"innovation": law, "n": n, "break": brk, "p_pre": params.p_pre,
                            "p_post": p_post}, pre, brk + 1, rho_of(law, p_post), None)


def run_study(params: StudyParams, workers: int | None = None, keep_samples: bool = False) -> StudyReport:
    """Run every cell of a study; rejection rates come with binomial standard errors."""
    workers = worker_count(workers)
    cells = []
    for idx, (cell_params, rho, change_at, rho_post, p_true) in enumerate(_cells(params)):
        start = time.perf_counter()
        tasks = [
            _Task(cell=idx, rep=r, seed=params.master_seed, n=cell_params["n"], h=params.h,
                  phi=params.phi, innovation=cell_params["innovation"], df=params.df, rho=rho,
                  level=params.level, bandwidth=params.bandwidth, change_at=change_at,
                  rho_post=rho_post, p_true=p_true)
            for r in range(params.reps)
        ]
        out = _execute(tasks, workers)
        values = np.array([o[0] for o in out])
        ok = np.isfinite(values)
        rejections = sum(o[2] for o in out)
        rate = rejections / params.reps
        cell_params = dict(cell_params, rho=rho, rho_post=rho_post)
        extra = {}
        if params.kind == "clt_check":
            z = values[ok]
            ks = stats.kstest(z, "norm")
            extra = {"mean_z": float(z.mean()), "sd_z": float(z.std(ddof=1)),
                     "ks_stat": float(ks.statistic), "ks_pvalue": float(ks.pvalue),
                     "mean_p_hat": float(np.mean([o[1] for o in out]))}
        elif params.kind == "null_size":
            ks = stats.kstest(values[ok], np.vectorize(lambda v: kolmogorov_cdf(v, KOLMOGOROV)))
            extra = {"ks_stat": float(ks.statistic), "ks_pvalue": float(ks.pvalue)}
        cells.append(StudyCell(
            params=cell_params, reps=params.reps, rejections=int(rejections),
            degenerate=int((~ok).sum()), rate=rate,
            se=math.sqrt(rate * (1 - rate) / params.reps), runtime=time.perf_counter() - start,
            extra=extra, samples=values if keep_samples else None,
        ))
        log.info("cell %d %s: rate %.3f", idx, cell_params, rate)
    return StudyReport(kind=params.kind, params=params.as_dict(), cells=cells)


def realized_variance(x: np.ndarray) -> float:
    """Mean squared one-step increment of ``x``."""
    dx = np.diff(np.asarray(x, dtype=np.float64))
    return float(np.mean(dx * dx))


def noisy_overlay(pair: PairedSeries, h: int, d, w, reps: int = 100, seed: int = 0,
                  variance: str = "realized") -> dict:
    """Add Gaussian white noise to x and recompute the weighted dependence ``reps`` times.

    ``variance`` selects the noise variance: ``"realized"`` uses the mean
    squared increment of x, ``"sample"`` the sample variance of its levels.
    """
    from .estimators import estimate_awopd

    if variance == "realized":
        v = realized_variance(pair.x)
    elif variance == "sample":
        v = float(np.var(pair.x, ddof=1))
    else:
        raise InvalidInputError(f"unknown noise variance rule {variance!r}")
    sd = math.sqrt(v)
    values, comparisons, coincidences = [], [], []
    for r in range(reps):
        rng = make_rng(seed, r)
        noisy = PairedSeries(pair.x + sd * rng.standard_normal(pair.n), pair.y)
        est = estimate_awopd(noisy, h, d, w)
        values.append(est.awopd_value)
        comparisons.append(est.comparison_value)
        coincidences.append(est.coincidences)
    values = np.array(values)
    comparisons = np.array(comparisons)
    coincidences = np.array(coincidences)
    return {
        "reps": reps,
        "noise_variance": v,
        "variance_rule": variance,
        "mean_awopd_value": float(values.mean()),
        "mean_comparison_value": float(comparisons.mean()),
        "sd_comparison_value": float(comparisons.std(ddof=1)) if reps > 1 else 0.0,
        "sd_awopd_value": float(values.std(ddof=1)) if reps > 1 else 0.0,
        "reps_without_coincidence": int(np.count_nonzero(coincidences == 0)),
        "mean_coincidences": float(coincidences.mean()),
    }
