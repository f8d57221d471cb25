"""Tensor-ellipse overlay: principal components of each diffusion matrix
drawn as an ellipse centered on its point (subsampled by --stride)."""

from __future__ import annotations

import argparse
import sys

import numpy as np
import matplotlib.pyplot as plt
from matplotlib.patches import Ellipse

from ._common import (
    InputError,
    check_aligned,
    load_csv,
    lower_triangle_to_matrices,
    save_figure,
)


def render(points_path, tensors_path, out_path, scale=0.2, stride=10):
    pts = load_csv(points_path, expect_cols=2)
    mats = lower_triangle_to_matrices(load_csv(tensors_path, expect_cols=3))
    check_aligned("points", pts, "tensors", mats[:, :, 0])

    fig, ax = plt.subplots(figsize=(5.2, 4.4))
    ax.scatter(pts[:, 0], pts[:, 1], s=2, c="0.8", linewidths=0, zorder=1)
    for k in range(0, pts.shape[0], max(1, stride)):
        w, v = np.linalg.eigh(mats[k])
        if w[0] <= 0:
            continue
        radii = scale * np.sqrt(w)
        ang = np.degrees(np.arctan2(v[1, 0], v[0, 0]))
        ax.add_patch(
            Ellipse(pts[k], 2 * radii[0], 2 * radii[1], angle=ang,
                    fill=False, color="tab:green", lw=0.7, zorder=2)
        )
    ax.set_xlabel("cv 1")
    ax.set_ylabel("cv 2")
    ax.set_title("diffusion tensor principal components")
    ax.set_aspect("equal")
    fig.tight_layout()
    return save_figure(fig, out_path)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--points", required=True)
    ap.add_argument("--tensors", required=True)
    ap.add_argument("--scale", type=float, default=0.2,
                    help="ellipse radius per sqrt(eigenvalue)")
    ap.add_argument("--stride", type=int, default=10)
    ap.add_argument("--out", required=True)
    args = ap.parse_args(argv)
    try:
        written = render(args.points, args.tensors, args.out, args.scale, args.stride)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    print("\n".join(written))
    return 0


if __name__ == "__main__":
    sys.exit(main())
