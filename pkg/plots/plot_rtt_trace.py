#!/usr/bin/env python3
"""Step-shaped echo RTT over time from a `simulate` rtt_trace CSV."""

import matplotlib.pyplot as plt

from plotlib import floats, load_columns, make_parser, run


def main():
    args = make_parser(__doc__).parse_args()
    data = load_columns(args.infile, ["time_s", "rtt_s"])
    t = floats(data["time_s"])
    rtt = [v * 1e3 for v in floats(data["rtt_s"])]
    fig, ax = plt.subplots(figsize=(9, 4))
    ax.step(t, rtt, where="post")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("RTT (ms)")
    ax.set_title(args.title or "User-to-service round trip over time")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(args.out)


if __name__ == "__main__":
    run(main)
