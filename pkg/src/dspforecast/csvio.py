"""Reading and writing ``timestamp,value`` trace files and JSON sidecars."""

from __future__ import annotations

import csv
import json
import math
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import MalformedCSVError
from .series import UniformSeries, _quadratic_spline


def parse_timestamp(text: str) -> float:
    """UNIX seconds or an RFC 3339 timestamp, as float seconds since the epoch."""
    text = text.strip()
    try:
        value = float(text)
    except ValueError:
        pass
    else:
        if not math.isfinite(value):
            raise ValueError(f"non-finite timestamp {text!r}")
        return value
    iso = text[:-1] + "+00:00" if text.endswith(("Z", "z")) else text
    stamp = datetime.fromisoformat(iso.replace("t", "T", 1) if "t" in iso[:11] else iso)
    if stamp.tzinfo is None:
        raise ValueError(f"timestamp {text!r} has no UTC offset")
    return stamp.timestamp()


def format_timestamp(seconds: float, style: str = "unix") -> str:
    if style == "unix":
        return str(int(seconds)) if float(seconds).is_integer() else repr(float(seconds))
    if style == "rfc3339":
        return datetime.fromtimestamp(seconds, tz=timezone.utc).isoformat().replace("+00:00", "Z")
    raise ValueError(f"unknown timestamp style {style!r}")


def read_csv(path, step: float | None = None, fill_gaps: bool = True) -> UniformSeries:
    """Load a trace; the step defaults to the smallest timestamp difference.

    Missing timestamps (gaps that are whole multiples of the step) are filled
    from a quadratic spline through the observed points when ``fill_gaps``.
    Any other irregularity raises :class:`MalformedCSVError` naming the line.
    """
    path = Path(path)
    times, values, lines = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise MalformedCSVError(path, 1, "file is empty")
        if [h.strip().lower() for h in header] != ["timestamp", "value"]:
            raise MalformedCSVError(path, 1, f"expected header 'timestamp,value', got {header}")
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise MalformedCSVError(path, line, f"expected 2 columns, got {len(row)}")
            try:
                t = parse_timestamp(row[0])
            except ValueError as exc:
                raise MalformedCSVError(path, line, f"bad timestamp: {exc}") from None
            try:
                v = float(row[1])
            except ValueError:
                raise MalformedCSVError(path, line, f"bad value {row[1]!r}") from None
            if not math.isfinite(v):
                raise MalformedCSVError(path, line, f"non-finite value {row[1]!r}")
            if times and t <= times[-1]:
                raise MalformedCSVError(path, line, "timestamps must increase strictly")
            times.append(t)
            values.append(v)
            lines.append(line)
    if not values:
        raise MalformedCSVError(path, 2, "no data rows")
    t = np.asarray(times)
    y = np.asarray(values)
    if t.size == 1:
        return UniformSeries(t[0], float(step or 1.0), y)
    diffs = np.diff(t)
    step = float(step or diffs.min())
    offsets = (t - t[0]) / step
    idx = np.rint(offsets).astype(int)
    bad = np.flatnonzero(np.abs(offsets - idx) > 1e-6)
    if bad.size:
        raise MalformedCSVError(path, lines[bad[0]], f"timestamp is off the {step}s grid")
    if idx[-1] + 1 != y.size:
        gap = int(np.flatnonzero(np.diff(idx) > 1)[0]) + 1
        if not fill_gaps:
            raise MalformedCSVError(path, lines[gap], "gap in timestamps")
        if y.size < 3:
            raise MalformedCSVError(path, lines[gap], "too few points to fill gaps")
        full = _quadratic_spline(idx.astype(float), y)(np.arange(idx[-1] + 1, dtype=float))
        full[idx] = y
        y = full
    return UniformSeries(float(t[0]), step, y)


def write_csv(series: UniformSeries, path, style: str = "unix") -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "value"])
        for t, v in zip(series.timestamps, series.values):
            w.writerow([format_timestamp(t, style), repr(float(v))])


def write_json(data: dict, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())
