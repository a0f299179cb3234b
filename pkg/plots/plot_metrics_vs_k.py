#!/usr/bin/env python3
"""Four-panel metrics-vs-k figure (optimal-DC probability, mean distance,
mean delay, migration cost) from an `analyze` CSV."""

import matplotlib.pyplot as plt

from plotlib import floats, load_columns, make_parser, run

PANELS = [
    ("pi0", "P(optimal DC)", None),
    ("mean_distance", "mean distance (hops)", None),
    ("mean_delay_s", "mean delay (s)", None),
    ("migration_cost_bits", "migration cost (bits)", "log"),
]


def main():
    args = make_parser(__doc__).parse_args()
    data = load_columns(args.infile, ["k"] + [c for c, _, _ in PANELS])
    k = floats(data["k"])
    fig, axes = plt.subplots(2, 2, figsize=(9, 7), sharex=True)
    for ax, (column, label, scale) in zip(axes.flat, PANELS):
        ax.plot(k, floats(data[column]), marker="o")
        ax.set_ylabel(label)
        ax.grid(True, alpha=0.3)
        if scale:
            ax.set_yscale(scale)
    for ax in axes[1]:
        ax.set_xlabel("k (rings until forced migration)")
    fig.suptitle(args.title or "Mobility-chain metrics vs service-area size")
    fig.tight_layout()
    fig.savefig(args.out)


if __name__ == "__main__":
    run(main)
