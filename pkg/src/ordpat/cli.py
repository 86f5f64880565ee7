"""Command line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 degenerate statistics.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .breaktest import t_statistic, w_statistic
from .dataio import align, load_csv, load_pair_csv, select, write_pair_csv
from .errors import InvalidInputError, OrdpatError
from .estimators import estimate_awopd, estimate_dependence
from .longrun import KernelConfig, confidence_interval, gamma2_q, sigma2_p
from .metrics import METRIC_KINDS, WEIGHT_PRESETS, PatternMetric, load_config, make_weight
from .patterns import check_order
from .simulate import (
    INNOVATIONS,
    STUDY_KINDS,
    Ar1PairConfig,
    BreakSpec,
    StudyParams,
    calibrate_rho,
    gen_ar1_pair,
    gen_with_break,
    noisy_overlay,
    run_study,
    save_calibration,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DEGENERATE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("table", "csv", "json"), default="table")
    p.add_argument("--out", type=Path, help="directory for result and trajectory files")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", type=Path, help="JSON file with default values for any option")
    p.add_argument("-v", "--verbose", action="store_true")


def _analysis(p: argparse.ArgumentParser) -> None:
    p.add_argument("inputs", nargs="+", type=Path,
                   help="one CSV with both series as columns, or two CSVs joined on date")
    p.add_argument("--h", type=int, default=2, help="pattern order (window of h+1 points)")
    p.add_argument("--level", type=float, default=0.05)
    p.add_argument("--kernel", choices=("bartlett",), default="bartlett")
    p.add_argument("--bandwidth", type=float, help="fixed bandwidth instead of ln(n)")
    p.add_argument("--date-column", help="date column (default: 'date' if present for one file, 'Date' for two)")
    p.add_argument("--x-column", default="x")
    p.add_argument("--y-column", default="y")
    p.add_argument("--value-column", default="Close", help="value column when reading two files")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--negate-y", action="store_true", help="analyze (X, -Y) for negative dependence")
    p.add_argument("--start", help="first date of the analysis window")
    p.add_argument("--end", help="last date of the analysis window")
    p.add_argument("--count", type=int, help="number of observations from --start")
    p.add_argument("--allow-large", action="store_true", help="lift the cap on h")


def _metric_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--metric", default="discrete",
                   help=f"one of {', '.join(k for k in METRIC_KINDS if k != 'user-table')} or a JSON file")
    p.add_argument("--weight", default="indicator",
                   help=f"preset ({', '.join(WEIGHT_PRESETS)}) or a JSON file")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ordpat", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"ordpat {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("analyze", help="estimate p, q, r, s and the standardized coefficient")
    _analysis(p)
    _common(p)

    p = sub.add_parser("breaktest", help="CUSUM test for a break in pattern coincidence")
    _analysis(p)
    _common(p)

    p = sub.add_parser("awopd", help="weighted ordinal pattern dependence and its break test")
    _analysis(p)
    _metric_args(p)
    p.add_argument("--one-sided", action="store_true", help="signed partial sums in the W statistic")
    p.add_argument("--noise-reps", type=int, default=0, help="repeat with Gaussian noise added to x")
    p.add_argument("--noise-variance", choices=("realized", "sample"), default="realized")
    _common(p)

    p = sub.add_parser("simulate", help="generate a coupled AR(1) pair")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--phi", type=float, default=0.2)
    p.add_argument("--rho", type=float, default=0.0)
    p.add_argument("--innovation", choices=INNOVATIONS, default="gaussian")
    p.add_argument("--df", type=float, default=2.0)
    p.add_argument("--burn-in", type=int, default=1000)
    p.add_argument("--break-at", type=int, help="first 1-based index of the post-break regime")
    p.add_argument("--rho-post", type=float)
    p.add_argument("--phi-post", type=float)
    _common(p)

    p = sub.add_parser("power", help="Monte Carlo size, power and CLT studies")
    p.add_argument("--kind", choices=STUDY_KINDS, default="power_table")
    p.add_argument("--n", type=int, nargs="+", default=[500, 1000, 2000])
    p.add_argument("--h", type=int, default=2)
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--level", type=float, default=0.05)
    p.add_argument("--phi", type=float, default=0.2)
    p.add_argument("--innovation", choices=INNOVATIONS, nargs="+", default=list(INNOVATIONS))
    p.add_argument("--df", type=float, default=2.0)
    p.add_argument("--p-pre", type=float, default=0.635,
                   help="coincidence probability before the break; negative means independent series")
    p.add_argument("--p-post", type=float, default=0.437)
    p.add_argument("--break-fractions", type=float, nargs="+", default=[0.25, 1 / 3, 0.5])
    p.add_argument("--post-grid", type=float, nargs="+",
                   default=[0.6353, 0.6, 0.55, 0.5378, 0.5, 0.45, 0.4])
    p.add_argument("--bandwidth", type=float)
    p.add_argument("--workers", type=int, help="process count (capped by ORDPAT_THREADS)")
    p.add_argument("--calibration-windows", type=int, default=1_000_000)
    _common(p)

    p = sub.add_parser("calibrate", help="find the coupling that yields a target coincidence probability")
    p.add_argument("--phi", type=float, default=0.2)
    p.add_argument("--innovation", choices=INNOVATIONS, default="gaussian")
    p.add_argument("--df", type=float, default=2.0)
    p.add_argument("--h", type=int, default=2)
    p.add_argument("--target", type=float, required=True)
    p.add_argument("--windows", type=int, default=1_000_000)
    p.add_argument("--table", type=Path, help="calibration CSV to update (default: bundled table)")
    p.add_argument("--no-save", action="store_true")
    _common(p)
    p.set_defaults(seed=20140601)
    return parser


# --- helpers -------------------------------------------------------------------

def _kernel(args) -> KernelConfig:
    return KernelConfig(bandwidth_override=args.bandwidth)


def _header(path: Path, delimiter: str) -> list[str]:
    try:
        with open(path, newline="") as fh:
            return next(csv.reader(fh, delimiter=delimiter), [])
    except OSError:
        return []


def _load_inputs(args):
    if len(args.inputs) == 1:
        date_col = args.date_column
        if date_col is None and "date" in _header(args.inputs[0], args.delimiter):
            date_col = "date"
        pair = load_pair_csv(args.inputs[0], date_col, args.x_column, args.y_column, args.delimiter)
    elif len(args.inputs) == 2:
        date_col = args.date_column or "Date"
        a = load_csv(args.inputs[0], date_col, args.value_column, delimiter=args.delimiter)
        b = load_csv(args.inputs[1], date_col, args.value_column, delimiter=args.delimiter)
        pair = align(a, b)
    else:
        raise UsageError("give one paired CSV or two single-series CSVs")
    if args.start or args.end or args.count:
        pair = select(pair, args.start, args.end, args.count)
    if args.negate_y:
        pair = pair.negated()
    check_order(args.h, allow_large=args.allow_large)
    if pair.n < args.h + 2:
        raise InvalidInputError(f"need at least h + 2 = {args.h + 2} observations, got {pair.n}")
    return pair


def _load_metric(args, h):
    weight = None
    if Path(args.metric).suffix == ".json":
        fh, metric, w = load_config(args.metric)
        if metric is None:
            raise InvalidInputError(f"{args.metric} has no distance table")
        weight = w
    else:
        metric = PatternMetric(args.metric, h)
    if metric.h != h:
        raise InvalidInputError(f"metric table is for h={metric.h}, analysis uses h={h}")
    if Path(args.weight).suffix == ".json":
        _, _, weight = load_config(args.weight)
        if weight is None:
            raise InvalidInputError(f"{args.weight} has no weights")
    elif weight is None or args.weight != "indicator":
        weight = make_weight(args.weight)
    return metric, weight


def _resolved(args) -> dict:
    out = {}
    for k, v in vars(args).items():
        if isinstance(v, Path):
            v = str(v)
        elif isinstance(v, list):
            v = [str(i) if isinstance(i, Path) else i for i in v]
        out[k] = v
    return out


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        elif isinstance(v, (list, tuple)):
            out[key] = json.dumps(v)
        else:
            out[key] = v
    return out


def _emit(args, results: dict, stream) -> None:
    record = {"command": args.command, "version": __version__, "seed": args.seed,
              "config": _resolved(args), "results": results}
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "result.json").write_text(json.dumps(record, indent=2))
    if args.format == "json":
        stream.write(json.dumps(record, indent=2) + "\n")
    elif args.format == "csv":
        flat = _flatten(results)
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(flat))
        writer.writeheader()
        writer.writerow(flat)
        stream.write(buf.getvalue())
    else:
        flat = _flatten(results)
        width = max(len(k) for k in flat)
        for k, v in flat.items():
            if isinstance(v, float):
                v = f"{v:.6g}"
            stream.write(f"{k:<{width}}  {v}\n")


def _window_info(pair) -> dict:
    info = {"n": pair.n}
    if pair.timestamps is not None:
        info.update(start=pair.timestamps[0], end=pair.timestamps[-1])
    for key in ("dropped_x", "dropped_y", "negated_y"):
        if key in pair.metadata:
            info[key] = pair.metadata[key]
    return info


# --- commands ------------------------------------------------------------------

def cmd_analyze(args, stream):
    pair = _load_inputs(args)
    cfg = _kernel(args)
    est = estimate_dependence(pair, args.h, cfg, with_se=False)
    sig2 = sigma2_p(pair, args.h, cfg)
    gam2 = gamma2_q(pair, args.h, cfg)
    results = est.as_dict()
    results["se_p"] = (sig2 / pair.n) ** 0.5
    results["se_q"] = (gam2 / pair.n) ** 0.5
    results["ci_p"] = list(confidence_interval(est.p_hat, sig2, pair.n, args.level))
    results["ci_q"] = list(confidence_interval(est.q_hat, gam2, pair.n, args.level))
    results["bandwidth"] = cfg.bandwidth(pair.n)
    results["window"] = _window_info(pair)
    _emit(args, results, stream)


def _write_trajectory(args, res, pair):
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        ts = None if pair.timestamps is None else list(pair.timestamps)
        res.write_trajectory_csv(args.out / "trajectory.csv", ts)
        res.write_trajectory_json(args.out / "trajectory.json")


def cmd_breaktest(args, stream):
    pair = _load_inputs(args)
    res = t_statistic(pair, args.h, _kernel(args), args.level)
    results = res.as_dict()
    results["window"] = _window_info(pair)
    _write_trajectory(args, res, pair)
    _emit(args, results, stream)


def cmd_awopd(args, stream):
    pair = _load_inputs(args)
    metric, weight = _load_metric(args, args.h)
    est = estimate_awopd(pair, args.h, metric, weight)
    results = {"awopd": est.as_dict()}
    res = w_statistic(pair, args.h, metric, weight, _kernel(args), args.level,
                      absolute=not args.one_sided)
    results["break_test"] = res.as_dict()
    _write_trajectory(args, res, pair)
    if args.noise_reps > 0:
        results["noisy_overlay"] = noisy_overlay(pair, args.h, metric, weight, args.noise_reps,
                                                 args.seed, args.noise_variance)
    results["window"] = _window_info(pair)
    _emit(args, results, stream)


def cmd_simulate(args, stream):
    cfg = Ar1PairConfig(phi=args.phi, rho=args.rho, innovation=args.innovation, n=args.n,
                        df=args.df, burn_in=args.burn_in, seed=args.seed)
    if args.break_at is not None:
        post = args.rho if args.rho_post is None else args.rho_post
        pair = gen_with_break(cfg, BreakSpec(args.break_at, post, args.phi_post))
    else:
        pair = gen_ar1_pair(cfg)
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        write_pair_csv(pair, args.out / "pair.csv")
    if args.format == "json":
        record = {"command": "simulate", "version": __version__, "seed": args.seed,
                  "config": _resolved(args), "results": {"x": pair.x.tolist(), "y": pair.y.tolist()}}
        stream.write(json.dumps(record) + "\n")
    else:
        writer = csv.writer(stream)
        writer.writerow(["t", "x", "y"])
        for t, (xv, yv) in enumerate(zip(pair.x, pair.y), start=1):
            writer.writerow([t, repr(float(xv)), repr(float(yv))])


def cmd_power(args, stream):
    params = StudyParams(
        kind=args.kind, n_values=tuple(args.n), h=args.h, reps=args.reps, level=args.level,
        phi=args.phi, innovations=tuple(args.innovation), df=args.df,
        p_pre=None if args.p_pre < 0 else args.p_pre, p_post=args.p_post,
        break_fractions=tuple(args.break_fractions), post_grid=tuple(args.post_grid),
        bandwidth=args.bandwidth, master_seed=args.seed,
        calibration_windows=args.calibration_windows,
    )
    report = run_study(params, workers=args.workers)
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        report.write_csv(args.out / f"{args.kind}.csv")
        (args.out / f"{args.kind}.json").write_text(report.to_json())
    if args.format == "json":
        record = {"command": "power", "version": __version__, "seed": args.seed,
                  "config": _resolved(args), "results": json.loads(report.to_json())}
        stream.write(json.dumps(record, indent=2) + "\n")
    else:
        rows = [c.row() for c in report.cells]
        names = []
        for r in rows:
            names += [k for k in r if k not in names]
        writer = csv.DictWriter(stream, fieldnames=names)
        writer.writeheader()
        writer.writerows(rows)


def cmd_calibrate(args, stream):
    cal = calibrate_rho(args.phi, args.innovation, args.h, args.target, df=args.df,
                        windows=args.windows, seed=args.seed)
    if not args.no_save:
        save_calibration(cal, args.table)
    results = {k: getattr(cal, k) for k in cal.__dataclass_fields__}
    results["saved_to"] = None if args.no_save else str(args.table or "bundled table")
    _emit(args, results, stream)


COMMANDS = {
    "analyze": cmd_analyze,
    "breaktest": cmd_breaktest,
    "awopd": cmd_awopd,
    "simulate": cmd_simulate,
    "power": cmd_power,
    "calibrate": cmd_calibrate,
}


def _apply_config(parser, argv):
    """Defaults from ``--config`` apply to the chosen subcommand; explicit flags win."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", type=Path)
    known, _ = pre.parse_known_args(argv)
    if known.config is None:
        return
    try:
        defaults = json.loads(known.config.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {known.config}: {exc}")
    if not isinstance(defaults, dict):
        raise UsageError("config file must hold a JSON object")
    defaults = {k.lstrip("-").replace("-", "_"): v for k, v in defaults.items()}
    defaults.pop("inputs", None)
    for action in parser._subparsers._group_actions:
        for sub in action.choices.values():
            own = {}
            for a in sub._actions:
                if a.dest in defaults:
                    v = defaults[a.dest]
                    own[a.dest] = Path(v) if a.type is Path and v is not None else v
            sub.set_defaults(**own)


def main(argv=None, stream=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    stream = stream or sys.stdout
    parser = build_parser()
    try:
        _apply_config(parser, argv)
    except UsageError as exc:
        sys.stderr.write(f"ordpat: error: {exc}\n")
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args, stream)
    except UsageError as exc:
        sys.stderr.write(f"ordpat: error: {exc}\n")
        return EXIT_USAGE
    except OrdpatError as exc:
        sys.stderr.write(f"ordpat: {type(exc).__name__}: {exc}\n")
        return exc.exit_code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
