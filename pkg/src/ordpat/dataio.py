"""CSV ingestion and date alignment of two observed series."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from datetime import date, datetime
from pathlib import Path

import numpy as np

from .errors import DataError
from .estimators import PairedSeries


@dataclass(frozen=True)
class RawSeries:
    dates: tuple[str, ...]
    values: np.ndarray = field(repr=False)
    name: str = "series"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (len(self.dates),):
            raise DataError(f"{self.name}: dates and values differ in length")
        values.flags.writeable = False
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.dates)


def _parse_date(text: str) -> date:
    text = text.strip()
    try:
        return date.fromisoformat(text)
    except ValueError:
        pass
    try:
        return datetime.fromisoformat(text).date()
    except ValueError:
        raise DataError(f"cannot parse date {text!r}") from None


def load_csv(path, date_column: str = "Date", value_column: str = "Close", sort: bool = True,
             delimiter: str = ",", name: str | None = None) -> RawSeries:
    """Read one dated series; row numbers in errors count the header as row 1."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh, delimiter=delimiter)
        header = reader.fieldnames or []
        for col in (date_column, value_column):
            if col not in header:
                raise DataError(f"{path}: column {col!r} not found (have {header})")
        rows = []
        problems = []
        for rownum, row in enumerate(reader, start=2):
            raw_date = row.get(date_column) or ""
            raw_value = (row.get(value_column) or "").strip()
            try:
                d = _parse_date(raw_date)
            except DataError as exc:
                problems.append(f"row {rownum}: {exc}")
                continue
            try:
                v = float(raw_value)
            except ValueError:
                problems.append(f"row {rownum}: cannot parse value {raw_value!r}")
                continue
            if not math.isfinite(v):
                problems.append(f"row {rownum}: non-finite value {raw_value!r}")
                continue
            rows.append((d, v))
    if problems:
        raise DataError(f"{path}: " + "; ".join(problems[:10])
                        + (f" (+{len(problems) - 10} more)" if len(problems) > 10 else ""))
    if not rows:
        raise DataError(f"{path}: no data rows")

    seen = {}
    for d, _ in rows:
        seen[d] = seen.get(d, 0) + 1
    dups = sorted(d.isoformat() for d, c in seen.items() if c > 1)
    if dups:
        raise DataError(f"{path}: duplicate dates {dups[:10]}")
    if sort:
        rows.sort(key=lambda r: r[0])
    elif any(a[0] >= b[0] for a, b in zip(rows, rows[1:])):
        raise DataError(f"{path}: dates are not strictly increasing (pass sort=True)")
    return RawSeries(tuple(d.isoformat() for d, _ in rows), np.array([v for _, v in rows]),
                     name or path.stem)


def align(a: RawSeries, b: RawSeries, policy: str = "inner_join") -> PairedSeries:
    """Keep the dates present in both series, in ascending order."""
    if policy != "inner_join":
        raise DataError(f"unsupported alignment policy {policy!r}")
    if len(a) == 0 or len(b) == 0:
        raise DataError("cannot align an empty series")
    pos_b = {d: i for i, d in enumerate(b.dates)}
    ia, ib = [], []
    for i, d in enumerate(a.dates):
        j = pos_b.get(d)
        if j is not None:
            ia.append(i)
            ib.append(j)
    if not ia:
        raise DataError(f"{a.name} and {b.name} share no dates")
    dates = [a.dates[i] for i in ia]
    meta = {
        "x_name": a.name,
        "y_name": b.name,
        "dropped_x": len(a) - len(ia),
        "dropped_y": len(b) - len(ib),
        "alignment": policy,
    }
    return PairedSeries(a.values[ia], b.values[ib], dates, meta)


def negate_y(pair: PairedSeries) -> PairedSeries:
    return pair.negated()


def select(pair: PairedSeries, start: str | None = None, end: str | None = None,
           count: int | None = None) -> PairedSeries:
    """Restrict to dates in ``[start, end]`` and/or the first ``count`` observations from ``start``."""
    if pair.timestamps is None and (start or end):
        raise DataError("date selection needs timestamps")
    lo, hi = 0, pair.n
    if pair.timestamps is not None:
        ts = [_parse_date(t) for t in pair.timestamps]
        if start:
            s = _parse_date(start)
            lo = next((i for i, t in enumerate(ts) if t >= s), pair.n)
        if end:
            e = _parse_date(end)
            hi = next((i for i, t in enumerate(ts) if t > e), pair.n)
    if count is not None:
        if count < 1:
            raise DataError("count must be positive")
        if lo + count > hi:
            raise DataError(f"only {hi - lo} observations available from the start date, {count} requested")
        hi = lo + count
    if hi <= lo:
        raise DataError("selection is empty")
    out = pair.slice(lo, hi)
    out.metadata.update(window_start=None if out.timestamps is None else out.timestamps[0],
                        window_end=None if out.timestamps is None else out.timestamps[-1])
    return out


def load_pair_csv(path, date_column: str | None = "date", x_column: str = "x", y_column: str = "y",
                  delimiter: str = ",") -> PairedSeries:
    """Read a file holding both series as columns of the same rows."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh, delimiter=delimiter)
        header = reader.fieldnames or []
        needed = [x_column, y_column] + ([date_column] if date_column else [])
        missing = [c for c in needed if c not in header]
        if missing:
            raise DataError(f"{path}: columns {missing} not found (have {header})")
        xs, ys, ts, problems = [], [], [], []
        for rownum, row in enumerate(reader, start=2):
            try:
                xv = float((row[x_column] or "").strip())
                yv = float((row[y_column] or "").strip())
            except ValueError:
                problems.append(f"row {rownum}: cannot parse {row[x_column]!r}, {row[y_column]!r}")
                continue
            if not (math.isfinite(xv) and math.isfinite(yv)):
                problems.append(f"row {rownum}: non-finite value")
                continue
            xs.append(xv)
            ys.append(yv)
            if date_column:
                ts.append(row[date_column].strip())
    if problems:
        raise DataError(f"{path}: misaligned or unparseable rows: " + "; ".join(problems[:10]))
    if not xs:
        raise DataError(f"{path}: no data rows")
    if date_column and len(set(ts)) != len(ts):
        raise DataError(f"{path}: duplicate dates")
    return PairedSeries(np.array(xs), np.array(ys), ts if date_column else None,
                        {"source": str(path)})


def write_pair_csv(pair: PairedSeries, path) -> None:
    """Write ``date, x, y`` rows with round-trip exact decimal floats."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if pair.timestamps is not None:
            writer.writerow(["date", "x", "y"])
            for t, xv, yv in zip(pair.timestamps, pair.x, pair.y):
                writer.writerow([t, repr(float(xv)), repr(float(yv))])
        else:
            writer.writerow(["x", "y"])
            for xv, yv in zip(pair.x, pair.y):
                writer.writerow([repr(float(xv)), repr(float(yv))])


def pair_to_json(pair: PairedSeries) -> str:
    return json.dumps({
        "dates": None if pair.timestamps is None else list(pair.timestamps),
        "x": pair.x.tolist(),
        "y": pair.y.tolist(),
        "metadata": pair.metadata,
    })
