"""Reactive-current intensity map: scatter colored by the row norms of the
current CSV, aligned with the points CSV."""

from __future__ import annotations

import argparse
import sys

import numpy as np
import matplotlib.pyplot as plt

from ._common import InputError, check_aligned, load_csv, save_figure


def render(points_path, current_path, out_path):
    pts = load_csv(points_path, expect_cols=2)
    cur = load_csv(current_path, expect_cols=2)
    check_aligned("points", pts, "current", cur)
    intensity = np.linalg.norm(cur, axis=1)

    fig, ax = plt.subplots(figsize=(5.2, 4.4))
    sc = ax.scatter(
        pts[:, 0], pts[:, 1], c=intensity, s=5, cmap="inferno", linewidths=0
    )
    fig.colorbar(sc, ax=ax, label="|current|")
    ax.set_xlabel("cv 1")
    ax.set_ylabel("cv 2")
    ax.set_title("reactive current intensity")
    fig.tight_layout()
    return save_figure(fig, out_path)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--points", required=True)
    ap.add_argument("--current", required=True)
    ap.add_argument("--out", required=True)
    args = ap.parse_args(argv)
    try:
        written = render(args.points, args.current, args.out)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    print("\n".join(written))
    return 0


if __name__ == "__main__":
    sys.exit(main())
