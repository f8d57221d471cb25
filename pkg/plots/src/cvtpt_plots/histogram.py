"""Committor-analysis histogram: bars of the normalized p_B counts."""

from __future__ import annotations

import argparse
import sys

import matplotlib.pyplot as plt

from ._common import InputError, load_csv, save_figure


def render(histogram_path, out_path, label=None):
    rows = load_csv(histogram_path, expect_cols=3, header=True)
    lo, hi, counts = rows[:, 0], rows[:, 1], rows[:, 2]
    fig, ax = plt.subplots(figsize=(4.6, 3.4))
    ax.bar(0.5 * (lo + hi), counts, width=(hi - lo), color="tab:orange",
           edgecolor="k", linewidth=0.4)
    ax.set_xlabel("fraction of trajectories reaching B first")
    ax.set_ylabel("fraction of start points")
    ax.set_xlim(0, 1)
    ax.set_title(label or "committor analysis")
    fig.tight_layout()
    return save_figure(fig, out_path)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--histogram", required=True)
    ap.add_argument("--label", default=None)
    ap.add_argument("--out", required=True)
    args = ap.parse_args(argv)
    try:
        written = render(args.histogram, args.out, args.label)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    print("\n".join(written))
    return 0


if __name__ == "__main__":
    sys.exit(main())
