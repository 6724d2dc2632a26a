"""Series files and comparison metrics."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__

VERSION_LINE = f"# besfem {__version__}"
BES_COLUMNS = ("hour", "T_a", "T_x", "T_c1", "T_c2", "phi_vent", "phi_trans_total")
METRICS_SCHEMA = 1


class SeriesError(ValueError):
    pass


def _g(v: float) -> str:
    return f"{v:.6g}"


def write_series(path: str | Path, columns: dict[str, np.ndarray]) -> None:
    """CSV with a version comment line, header, and 6 significant digits."""
    names = list(columns)
    data = [np.asarray(columns[c]) for c in names]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(VERSION_LINE + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for i in range(len(data[0])):
            w.writerow([str(int(col[i])) if name == "hour" else _g(col[i]) for name, col in zip(names, data)])


def bes_columns(series) -> dict[str, np.ndarray]:
    cols = {name: getattr(series, name) for name in BES_COLUMNS}
    if series.P_heat is not None:
        cols["P_heat"] = series.P_heat
    return cols


def fem_columns(series) -> dict[str, np.ndarray]:
    cols = {"hour": series.hour, "T_mean_core": series.T_mean_core}
    if series.probes is not None:
        for i in range(series.probes.shape[1]):
            cols[f"T_probe_{i + 1}"] = series.probes[:, i]
    return cols


def read_series(path: str | Path) -> dict[str, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#")) if r]
    if not rows:
        raise SeriesError(f"{path}: empty series file")
    header = [h.strip() for h in rows[0]]
    if "hour" not in header:
        raise SeriesError(f"{path}: no 'hour' column")
    try:
        values = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, len(header))
    except ValueError as exc:
        raise SeriesError(f"{path}: {exc}") from None
    return {name: values[:, i] for i, name in enumerate(header)}


def pick_temperature(columns: dict[str, np.ndarray], name: str | None = None) -> np.ndarray:
    if name is not None:
        if name not in columns:
            raise SeriesError(f"no column {name!r}")
        return columns[name]
    for candidate in ("T_a", "T_mean_core"):
        if candidate in columns:
            return columns[candidate]
    others = [c for c in columns if c != "hour"]
    if not others:
        raise SeriesError("no data column")
    return columns[others[0]]


@dataclass(frozen=True)
class ComparisonMetrics:
    rmse: float
    mbe: float
    max_abs: float
    n: int
    warmup_discarded: int

    def to_json(self) -> str:
        return json.dumps({"schema": METRICS_SCHEMA, **asdict(self)}, indent=2, sort_keys=True) + "\n"


def comparison_metrics(a, b, warmup: int = 0) -> ComparisonMetrics:
    """RMSE, mean bias ``mean(a - b)`` and max |a - b| after dropping ``warmup`` samples."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise SeriesError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    d = (a - b)[warmup:]
    if d.size == 0:
        raise SeriesError("no samples left after warm-up")
    return ComparisonMetrics(
        rmse=math.sqrt(float(np.mean(d * d))),
        mbe=float(np.mean(d)),
        max_abs=float(np.max(np.abs(d))),
        n=int(d.size),
        warmup_discarded=int(warmup),
    )


def align(hours_a: np.ndarray, hours_b: np.ndarray) -> None:
    """Raise SeriesError describing the first hour where two series disagree."""
    n = min(len(hours_a), len(hours_b))
    for i in range(n):
        if hours_a[i] != hours_b[i]:
            raise SeriesError(f"misaligned at row {i + 1}: hour {hours_a[i]:g} vs {hours_b[i]:g}")
    if len(hours_a) != len(hours_b):
        raise SeriesError(f"misaligned at row {n + 1}: series lengths {len(hours_a)} vs {len(hours_b)}")
