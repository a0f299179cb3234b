#!/usr/bin/env python3
"""Policy grid (continue/migrate letter per forward-probability and
distance) from a `policy --format csv` table."""

import matplotlib.pyplot as plt
from matplotlib.colors import ListedColormap

from plotlib import SchemaError, load_columns, make_parser, run


def main():
    args = make_parser(__doc__).parse_args()
    data = load_columns(args.infile, ["p"], optional=["threshold"])
    with open(args.infile, newline="") as fh:
        header = fh.readline().strip().split(",")
    d_cols = [c for c in header if c.startswith("d") and c[1:].isdigit()]
    if not d_cols:
        raise SchemaError(f"{args.infile}: no distance columns d1..dN")
    table = load_columns(args.infile, ["p", *d_cols])
    p_values = table["p"]
    grid = [
        [1 if table[c][i] == "M" else 0 for c in d_cols]
        for i in range(len(p_values))
    ]
    fig, ax = plt.subplots(figsize=(1.0 + 0.6 * len(d_cols), 1.0 + 0.45 * len(p_values)))
    cmap = ListedColormap(["#d8ecd8", "#c05050"])
    ax.imshow(grid, cmap=cmap, vmin=0, vmax=1, aspect="auto")
    for i, p in enumerate(p_values):
        for j, c in enumerate(d_cols):
            ax.text(j, i, table[c][i], ha="center", va="center", fontsize=9)
    ax.set_xticks(range(len(d_cols)), [c[1:] for c in d_cols])
    ax.set_yticks(range(len(p_values)), p_values)
    ax.set_xlabel("distance from serving DC (service areas)")
    ax.set_ylabel("forward probability p")
    ax.set_title(args.title or "Optimal migration policy (C = continue, M = migrate)")
    fig.tight_layout()
    fig.savefig(args.out)


if __name__ == "__main__":
    run(main)
