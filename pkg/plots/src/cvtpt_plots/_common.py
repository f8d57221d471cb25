"""Shared plumbing for the figure scripts.

These scripts are read-only consumers of the pipeline's CSV/JSON files;
they deliberately do not import the pipeline package. Figures are written
deterministically (fixed style, stripped metadata, pinned SVG hash salt)
so golden-image tests can compare byte hashes.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams.update(
    {
        "svg.hashsalt": "cvtpt-plots",
        "figure.dpi": 110,
        "savefig.dpi": 110,
        "font.size": 9,
    }
)


class InputError(Exception):
    """Missing or inconsistent input files."""


def load_csv(path: str, expect_cols: int | None = None, header: bool = False):
    if not os.path.exists(path):
        raise InputError(f"missing input file: {path}")
    arr = np.loadtxt(path, delimiter=",", ndmin=2, skiprows=1 if header else 0)
    if expect_cols is not None and arr.shape[1] != expect_cols:
        raise InputError(f"{path}: expected {expect_cols} columns, got {arr.shape[1]}")
    return arr


def check_aligned(name_a: str, a, name_b: str, b) -> None:
    if a.shape[0] != b.shape[0]:
        raise InputError(
            f"row-count mismatch: {name_a} has {a.shape[0]} rows, "
            f"{name_b} has {b.shape[0]}"
        )


def save_figure(fig, out_path: str) -> list[str]:
    """Write PNG and SVG siblings for the requested output path."""
    base, ext = os.path.splitext(out_path)
    if ext.lower() not in (".png", ".svg"):
        base = out_path
    parent = os.path.dirname(str(base))
    if parent:
        os.makedirs(parent, exist_ok=True)
    written = []
    for fmt in ("png", "svg"):
        target = f"{base}.{fmt}"
        fig.savefig(
            target,
            format=fmt,
            metadata=(
                {"Software": None}
                if fmt == "png"
                else {"Date": None, "Creator": None}
            ),
        )
        written.append(target)
    plt.close(fig)
    return written


def lower_triangle_to_matrices(rows: np.ndarray) -> np.ndarray:
    """(n, 3) lower-triangle rows -> (n, 2, 2) symmetric matrices."""
    if rows.shape[1] != 3:
        raise InputError(f"tensor file must have 3 columns, got {rows.shape[1]}")
    out = np.empty((rows.shape[0], 2, 2))
    out[:, 0, 0] = rows[:, 0]
    out[:, 1, 0] = rows[:, 1]
    out[:, 0, 1] = rows[:, 1]
    out[:, 1, 1] = rows[:, 2]
    return out
