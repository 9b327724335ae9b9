"""Field files (TVF1 binary and CSV) and small CSV helpers."""
from __future__ import annotations

import csv
import re
from pathlib import Path

import numpy as np

from .grid import PeriodicGrid

_HEADER = re.compile(rb"^TVF1 dim=(\d+) N=(\d+) kind=(scalar|vector)$")


def write_tvf1(path, values: np.ndarray, grid: PeriodicGrid) -> Path:
    """Write a scalar or vector field as an ASCII header line plus little-endian float64."""
    values = np.asarray(values, dtype=float)
    if values.shape == grid.shape:
        kind = "scalar"
    elif values.shape == (grid.dim,) + grid.shape:
        kind = "vector"
    else:
        raise ValueError(f"field shape {values.shape} does not fit grid {grid.shape}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(f"TVF1 dim={grid.dim} N={grid.N} kind={kind}\n".encode("ascii"))
        fh.write(np.ascontiguousarray(values).astype("<f8").tobytes(order="C"))
    return path


def read_tvf1(path) -> tuple[np.ndarray, PeriodicGrid]:
    with open(path, "rb") as fh:
        header = fh.readline().rstrip(b"\n")
        payload = fh.read()
    m = _HEADER.match(header)
    if m is None:
        raise ValueError(f"{path}: not a TVF1 file (header {header[:60]!r})")
    grid = PeriodicGrid(int(m.group(1)), int(m.group(2)))
    shape = grid.shape if m.group(3) == b"scalar" else (grid.dim,) + grid.shape
    data = np.frombuffer(payload, dtype="<f8")
    if data.size != int(np.prod(shape)):
        raise ValueError(f"{path}: expected {int(np.prod(shape))} values, found {data.size}")
    return data.reshape(shape).astype(float), grid


def write_field_csv(path, values: np.ndarray, grid: PeriodicGrid) -> Path:
    """One row per sample: index columns (component first for vectors), then value."""
    values = np.asarray(values, dtype=float)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    idx_names = [f"i{k}" for k in range(grid.dim)]
    vector = values.ndim == grid.dim + 1
    header = (["component"] if vector else []) + idx_names + ["value"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for index in np.ndindex(values.shape):
            w.writerow(list(index) + [repr(float(values[index]))])
    return path


def write_rows(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "pass" if v else "fail"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v
