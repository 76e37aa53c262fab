"""CSV and JSON round-trips for signals, set-valued signals and reports.

Numbers are written with 17 significant digits so floats survive a
round-trip bit for bit; JSON keys are sorted so equal reports give equal
bytes.
"""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import InvalidArgument
from .metric import Metric
from .signal import Grid, SetValuedSignal, Signal

GRID_RTOL = 1e-9


def fmt(x: float) -> str:
    return "%.17g" % x


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def signal_to_csv_text(f: Signal) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + [f"v{i + 1}" for i in range(f.dimension)])
    for t, row in zip(f.grid.times, f.values):
        w.writerow([fmt(t)] + [fmt(v) for v in row])
    return buf.getvalue()


def set_signal_to_csv_text(F: SetValuedSignal) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "k"] + [f"v{i + 1}" for i in range(F.dimension)])
    for t, s in zip(F.grid.times, F.sets):
        for k, p in enumerate(s.points):
            w.writerow([fmt(t), k] + [fmt(v) for v in p])
    return buf.getvalue()


def infer_grid(times: np.ndarray) -> Grid:
    n = len(times)
    if n < 2:
        raise InvalidArgument("need at least two samples to infer a grid")
    h = (times[-1] - times[0]) / (n - 1)
    if not h > 0:
        raise InvalidArgument("time column must be increasing")
    grid = Grid(float(times[0]), float(h), n)
    if np.max(np.abs(times - grid.times)) > GRID_RTOL * max(1.0, abs(times[-1])) + 1e-12:
        raise InvalidArgument("time column is not uniformly spaced")
    return grid


def _rows(text: str) -> tuple:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise InvalidArgument("empty CSV") from None
    rows = [r for r in reader if r]
    if not rows:
        raise InvalidArgument("CSV has no samples")
    try:
        data = np.array([[float(x) for x in r] for r in rows])
    except ValueError as exc:
        raise InvalidArgument(f"non-numeric CSV cell: {exc}") from None
    if data.ndim != 2 or data.shape[1] != len(header):
        raise InvalidArgument("ragged CSV rows")
    if not np.all(np.isfinite(data)):
        raise InvalidArgument("CSV contains NaN or infinite values")
    return header, data


def signal_from_csv_text(text: str, metric: str = "euclidean") -> Signal:
    header, data = _rows(text)
    if header[0] != "t" or len(header) < 2:
        raise InvalidArgument("expected header t,v1,...")
    grid = infer_grid(data[:, 0])
    return Signal(grid, data[:, 1:], Metric(metric, data.shape[1] - 1))


def set_signal_from_csv_text(text: str, metric: str = "euclidean") -> SetValuedSignal:
    header, data = _rows(text)
    if header[:2] != ["t", "k"] or len(header) < 3:
        raise InvalidArgument("expected header t,k,v1,...")
    times, starts = np.unique(data[:, 0], return_index=True)
    order = np.argsort(starts)
    times, starts = times[order], starts[order]
    if np.any(np.diff(times) <= 0):
        raise InvalidArgument("set rows must be grouped by increasing t")
    grid = infer_grid(times)
    bounds = list(starts) + [len(data)]
    sets = [data[bounds[i]:bounds[i + 1], 2:] for i in range(len(times))]
    return SetValuedSignal(grid, sets, Metric(metric, data.shape[1] - 2))


def write_text(path: Path, text: str, force: bool = False) -> Path:
    path = Path(path)
    if path.exists() and not force:
        raise InvalidArgument(f"{path} exists (use --force to overwrite)")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def read_signal(path, metric: str = "euclidean") -> Signal:
    return signal_from_csv_text(_read(path), metric)


def read_set_signal(path, metric: str = "euclidean") -> SetValuedSignal:
    return set_signal_from_csv_text(_read(path), metric)


def _read(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise InvalidArgument(f"cannot read {path}: {exc.strerror}") from None


def masks_to_csv_text(grid: Grid, masks: list, labels: Optional[np.ndarray] = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + [f"T{j}" for j in range(len(masks))] + ["label"])
    bits = np.stack([m.bits for m in masks], axis=1) if masks else np.zeros((grid.n, 0), dtype=bool)
    if labels is None:
        labels = np.where(bits.any(axis=1), bits.argmax(axis=1), -1)
    for t, row, lab in zip(grid.times, bits, labels):
        w.writerow([fmt(t)] + [int(b) for b in row] + [int(lab)])
    return buf.getvalue()
