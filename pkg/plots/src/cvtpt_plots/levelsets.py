"""Committor level sets over the point cloud.

Reads the points CSV and the aligned committor CSV, draws dashed contours
at the 0.1 ... 0.9 levels on a triangulated interpolation of the scatter,
and outlines the A/B regions if a regions JSON is given.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np
import matplotlib.pyplot as plt
from matplotlib.patches import Ellipse

from ._common import InputError, check_aligned, load_csv, save_figure

LEVELS = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]


def draw_region(ax, spec: dict, color: str) -> None:
    if spec.get("kind") == "ball":
        c = spec["center"]
        r = spec["radius"]
        ax.add_patch(
            Ellipse(c, 2 * r, 2 * r, fill=False, color=color, lw=1.4)
        )
    elif spec.get("kind") == "ellipse":
        # the quadratic form z^T S z = level has principal radii
        # sqrt(level / eigenvalue) along the eigenvectors of S
        s = np.asarray(spec["shape"], dtype=float)
        w, v = np.linalg.eigh(s)
        radii = np.sqrt(spec["level"] / w)
        ang = np.degrees(np.arctan2(v[1, 0], v[0, 0]))
        ax.add_patch(
            Ellipse(
                spec["center"], 2 * radii[0], 2 * radii[1], angle=ang,
                fill=False, color=color, lw=1.4,
            )
        )


def render(points_path, q_path, out_path, regions_path=None):
    pts = load_csv(points_path, expect_cols=2)
    q = load_csv(q_path, expect_cols=1).ravel()
    check_aligned("points", pts, "committor", q[:, None])

    fig, ax = plt.subplots(figsize=(5.2, 4.4))
    ax.scatter(pts[:, 0], pts[:, 1], s=2.5, c="0.75", linewidths=0, zorder=1)
    if np.ptp(q) > 1e-12:
        tri = ax.tricontour(
            pts[:, 0], pts[:, 1], q, levels=LEVELS,
            linestyles="dashed", cmap="viridis", zorder=2,
        )
        ax.clabel(tri, fmt="%.1f", fontsize=6)
    if regions_path:
        with open(regions_path) as fh:
            regions = json.load(fh)
        for key, color in (("A", "tab:red"), ("B", "tab:blue")):
            if key in regions:
                draw_region(ax, regions[key], color)
    ax.set_xlabel("cv 1")
    ax.set_ylabel("cv 2")
    ax.set_title("committor level sets")
    fig.tight_layout()
    return save_figure(fig, out_path)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--points", required=True)
    ap.add_argument("--q", required=True)
    ap.add_argument("--regions", default=None, help="JSON with A/B specs")
    ap.add_argument("--out", required=True, help="output image path (png/svg)")
    args = ap.parse_args(argv)
    try:
        written = render(args.points, args.q, args.out, args.regions)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    print("\n".join(written))
    return 0


if __name__ == "__main__":
    sys.exit(main())
