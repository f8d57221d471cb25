"""Bandwidth-sweep error curves, one line per kernel label in the CSV."""

from __future__ import annotations

import argparse
import csv
import sys

import matplotlib.pyplot as plt

from ._common import InputError, save_figure


def read_sweep(path):
    rows = []
    try:
        with open(path) as fh:
            reader = csv.DictReader(fh)
            for rec in reader:
                if rec.get("rms"):
                    rows.append(
                        (float(rec["epsilon"]), rec["kernel"], float(rec["rms"]))
                    )
    except FileNotFoundError as e:
        raise InputError(f"missing input file: {path}") from e
    if not rows:
        raise InputError(f"{path} holds no successful sweep rows")
    return rows


def render(sweep_path, out_path):
    rows = read_sweep(sweep_path)
    kernels = sorted({r[1] for r in rows})
    fig, ax = plt.subplots(figsize=(5.0, 3.8))
    colors = {"mmap": "tab:red", "dmap": "tab:blue"}
    for kern in kernels:
        pts = sorted((e, r) for e, k, r in rows if k == kern)
        ax.loglog(
            [p[0] for p in pts],
            [p[1] for p in pts],
            marker="o",
            ms=3.5,
            label=kern,
            color=colors.get(kern),
        )
    ax.set_xlabel("bandwidth")
    ax.set_ylabel("RMS error vs reference")
    ax.legend()
    ax.set_title("committor error vs kernel bandwidth")
    fig.tight_layout()
    return save_figure(fig, out_path)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sweep", required=True, help="sweep.csv from the pipeline")
    ap.add_argument("--out", required=True)
    args = ap.parse_args(argv)
    try:
        written = render(args.sweep, args.out)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    print("\n".join(written))
    return 0


if __name__ == "__main__":
    sys.exit(main())
