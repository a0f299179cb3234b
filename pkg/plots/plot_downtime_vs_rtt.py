#!/usr/bin/env python3
"""Downtime as a function of a control-path RTT, one line per labeled case,
from a sweep CSV with columns rtt_s, downtime_s[, case]."""

import matplotlib.pyplot as plt

from plotlib import floats, load_columns, make_parser, run


def main():
    args = make_parser(__doc__).parse_args()
    data = load_columns(args.infile, ["rtt_s", "downtime_s"], optional=["case"])
    rtt = [v * 1e3 for v in floats(data["rtt_s"])]
    down = [v * 1e3 for v in floats(data["downtime_s"])]
    cases = data.get("case", ["sweep"] * len(rtt))
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label in dict.fromkeys(cases):  # first-seen order
        xs = [x for x, c in zip(rtt, cases) if c == label]
        ys = [y for y, c in zip(down, cases) if c == label]
        ax.plot(xs, ys, marker="s", label=label)
    ax.set_xlabel("controller-to-target RTT (ms)")
    ax.set_ylabel("downtime (ms)")
    ax.set_title(args.title or "Migration downtime vs control-path latency")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(args.out)


if __name__ == "__main__":
    run(main)
