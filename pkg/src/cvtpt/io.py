"""CSV and JSON readers/writers for all pipeline artifacts.

Numeric array files are headerless CSV aligned row-by-row with the points
file; tensors are stored as the lower triangle in row-major order
(d(d+1)/2 columns). Floats are written with 17 significant digits so
rereading reproduces them bit-for-bit, which makes golden-file and
determinism tests meaningful. Tabular outputs (sweep rows, histograms)
carry a header line.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .errors import DataError
from .geometry import PointCloud, TensorField, Topology


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def write_matrix_csv(path, array: np.ndarray, header: str | None = None) -> None:
    arr = np.atleast_2d(np.asarray(array, dtype=float))
    with open(path, "w") as fh:
        if header:
            fh.write(header + "\n")
        for row in arr:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_matrix_csv(path, expect_cols: int | None = None) -> np.ndarray:
    if not os.path.exists(path):
        raise DataError(f"missing input file: {path}")
    try:
        arr = np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError as e:
        raise DataError(f"cannot parse {path}: {e}") from e
    if expect_cols is not None and arr.shape[1] != expect_cols:
        raise DataError(
            f"{path}: expected {expect_cols} columns, found {arr.shape[1]}"
        )
    return arr


def write_points(path, cloud_or_points) -> None:
    pts = (
        cloud_or_points.points
        if isinstance(cloud_or_points, PointCloud)
        else np.asarray(cloud_or_points, dtype=float)
    )
    write_matrix_csv(path, pts)


def read_points(path, topology: Topology) -> PointCloud:
    pts = read_matrix_csv(path, expect_cols=topology.dim)
    return PointCloud(points=pts, topology=topology)


def _tri_indices(d: int):
    return [(i, j) for i in range(d) for j in range(i + 1)]


def tensors_to_rows(tensors: np.ndarray) -> np.ndarray:
    """(n, d, d) -> (n, d(d+1)/2) lower triangle, row-major."""
    t = np.asarray(tensors, dtype=float)
    d = t.shape[-1]
    cols = [t[:, i, j] for i, j in _tri_indices(d)]
    return np.column_stack(cols)


def rows_to_tensors(rows: np.ndarray, d: int) -> np.ndarray:
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    want = d * (d + 1) // 2
    if rows.shape[1] != want:
        raise DataError(
            f"tensor rows have {rows.shape[1]} columns, expected {want} for d={d}"
        )
    out = np.zeros((rows.shape[0], d, d))
    for col, (i, j) in enumerate(_tri_indices(d)):
        out[:, i, j] = rows[:, col]
        out[:, j, i] = rows[:, col]
    return out


def write_tensors(path, tensors: np.ndarray) -> None:
    write_matrix_csv(path, tensors_to_rows(tensors))


def read_tensors(path, d: int) -> TensorField:
    rows = read_matrix_csv(path, expect_cols=d * (d + 1) // 2)
    return TensorField(rows_to_tensors(rows, d))


def write_vector(path, vec: np.ndarray) -> None:
    write_matrix_csv(path, np.asarray(vec, dtype=float).reshape(-1, 1))


def read_vector(path) -> np.ndarray:
    return read_matrix_csv(path, expect_cols=1).ravel()


def write_grid_field(path, values: np.ndarray) -> None:
    """Grid scalar field in row-major order (second index fastest), 1 column."""
    write_vector(path, np.asarray(values, dtype=float).ravel())


def read_grid_field(path, shape: tuple[int, int]) -> np.ndarray:
    v = read_vector(path)
    n = shape[0] * shape[1]
    if v.size != n:
        raise DataError(f"{path}: expected {n} rows for grid {shape}, found {v.size}")
    return v.reshape(shape)


def write_grid_tensors(path, tensors: np.ndarray) -> None:
    """Grid tensor field (N1, N2, d, d) in row-major node order."""
    t = np.asarray(tensors, dtype=float)
    write_matrix_csv(path, tensors_to_rows(t.reshape(-1, t.shape[-1], t.shape[-1])))


def read_grid_tensors(path, shape: tuple[int, int], d: int = 2) -> np.ndarray:
    rows = read_matrix_csv(path, expect_cols=d * (d + 1) // 2)
    n = shape[0] * shape[1]
    if rows.shape[0] != n:
        raise DataError(f"{path}: expected {n} rows for grid {shape}")
    return rows_to_tensors(rows, d).reshape(shape + (d, d))


def write_json(path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path) -> dict:
    if not os.path.exists(path):
        raise DataError(f"missing input file: {path}")
    with open(path) as fh:
        return json.load(fh)


def topology_to_json(topology: Topology) -> list:
    return [None if p is None else float(p) for p in topology.periods]


def topology_from_json(periods) -> Topology:
    if not isinstance(periods, (list, tuple)) or not periods:
        raise DataError("topology must be a nonempty list of periods/nulls")
    return Topology(tuple(None if p is None else float(p) for p in periods))
