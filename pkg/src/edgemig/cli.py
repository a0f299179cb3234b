"""Command-line front end: metric sweeps, policy tables, scenario runs,
and Monte-Carlo validation.

Subcommands
    analyze   per-k analytic metrics as CSV
    policy    optimal migration policy grid (text and CSV)
    simulate  run a scenario config; writes event log and metrics CSVs
    validate  analytic vs Monte-Carlo cross-check with a pass/fail exit code

All outputs are deterministic for a fixed seed and fixed inputs.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from pathlib import Path

from . import chain, costs, hexgrid, mdp
from .sim import ConfigError, SimMetrics, load_config, run
from .sim.runner import measure_downtime

ANALYZE_COLUMNS = [
    "k", "pi0", "mean_distance", "mean_delay_s", "migration_cost_bits",
    "sdt_full_s", "sdt_half_s", "sdt_tenth_s",
]
FRACTION_COLUMNS = {1.0: "sdt_full_s", 0.5: "sdt_half_s", 0.1: "sdt_tenth_s"}


def _num(value: float) -> str:
    if isinstance(value, float) and math.isnan(value):
        return "nan"
    return format(value, ".10g")


def _write_csv(path_or_none, header, rows, *, stdout):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    data = buf.getvalue()
    if path_or_none is None:
        stdout.write(data)
    else:
        Path(path_or_none).write_text(data, newline="")
    return data


def _parse_k_range(text: str) -> list[int]:
    lo, sep, hi = text.partition("..")
    try:
        if sep:
            start, end = int(lo), int(hi)
        else:
            start = end = int(lo)
    except ValueError:
        raise ConfigError(f"bad k range {text!r}; expected A..B") from None
    if start > end:
        return []
    return list(range(start, end + 1))


def _stationary(k: int):
    agg = chain.aggregate(hexgrid.build_full_walk(k), hexgrid.orbit_partition(k))
    return chain.steady_state(agg)


def cmd_analyze(args, stdout) -> int:
    ks = _parse_k_range(args.k)
    for k in ks:
        if not 2 <= k <= args.k_max:
            raise ConfigError(f"k must lie in [2, {args.k_max}]")
    delay = chain.DelayModel(coeff=args.delay_coeff)
    rtt = costs.RttModel(coeff=args.rtt_coeff)
    params = costs.TransferParams(
        objects_size=args.objects_size, sig_size=args.sig_size,
        mss=args.mss, w_max=args.w_max, p_loss=args.p_loss,
        t_vm_conversion=args.t_vm_conversion,
    )
    rows = []
    for k in ks:
        dist = _stationary(k)
        cost = costs.signaling_cost(params)
        row = [
            k,
            _num(chain.prob_optimal(dist)),
            _num(chain.avg_distance(dist)),
            _num(chain.avg_delay(dist, delay)),
            _num(costs.migration_cost(dist, k, cost)),
        ]
        row += [
            _num(costs.sdt_vs_k(k, dist, rtt, params.scaled(f)))
            for f in (1.0, 0.5, 0.1)
        ]
        rows.append(row)
    out = Path(args.out, "metrics_vs_k.csv") if args.out else None
    _write_csv(out, ANALYZE_COLUMNS, rows, stdout=stdout)
    return 0


def cmd_policy(args, stdout) -> int:
    p_values = [float(tok) for tok in args.p.split(",") if tok]
    rows = mdp.policy_table(
        p_values, args.tau, thr=args.thr, mu=args.mu,
        q_max=args.q_max, k_factor=args.k_factor, gamma_at_mu=args.gamma,
    )
    broken = [row.p for row in rows if not row.is_threshold]
    if broken:
        print(f"error: non-threshold policy at p in {broken}", file=sys.stderr)
        return 1
    if args.format == "text":
        stdout.write(mdp.policy_table_text(rows, thr=args.thr))
    else:
        header = ["p"] + [f"d{d}" for d in range(1, args.thr + 1)] + ["threshold"]
        csv_rows = [
            [_num(row.p)] + row.letters
            + ["inf" if math.isinf(row.threshold) else str(int(row.threshold))]
            for row in rows
        ]
        out = Path(args.out, "policy.csv") if args.out else None
        _write_csv(out, header, csv_rows, stdout=stdout)
    return 0


def _metrics_rows(metrics: SimMetrics):
    return [[
        metrics.handovers,
        metrics.migrations_count,
        _num(metrics.mean_downtime),
        _num(metrics.mean_migration_duration),
        _num(metrics.empirical_pi0),
        _num(metrics.empirical_mean_distance),
    ]]


def cmd_simulate(args, stdout) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config.seed = args.seed
    log, metrics = run(config)
    outdir = Path(args.out or ".")
    outdir.mkdir(parents=True, exist_ok=True)
    log.dump(outdir / "events.log")
    _write_csv(
        outdir / "metrics.csv",
        ["handovers", "migrations", "mean_downtime_s", "mean_migration_duration_s",
         "empirical_pi0", "empirical_mean_distance"],
        _metrics_rows(metrics), stdout=stdout,
    )
    _write_csv(
        outdir / "rtt_trace.csv",
        ["time_s", "rtt_s"],
        [[_num(t), _num(v)] for t, v in metrics.rtt_trace], stdout=stdout,
    )
    downtimes = measure_downtime(log)
    _write_csv(
        outdir / "migrations.csv",
        ["mig", "downtime_s", "duration_s"],
        [
            [i + 1, _num(d), _num(dur)]
            for i, (d, dur) in enumerate(zip(downtimes, metrics.migration_duration))
        ],
        stdout=stdout,
    )
    stdout.write(
        f"migrations={metrics.migrations_count} "
        f"mean_downtime_s={_num(metrics.mean_downtime)} "
        f"mean_migration_duration_s={_num(metrics.mean_migration_duration)}\n"
    )
    return 0


def cmd_validate(args, stdout) -> int:
    from .sim import preset_validate

    if args.samples < 10_000:
        raise ConfigError("validation needs at least 10000 samples")
    config = preset_validate(args.k, args.samples, args.seed)
    _, metrics = run(config)
    dist = _stationary(args.k)
    pi0 = chain.prob_optimal(dist)
    mean_dist = chain.avg_distance(dist)
    err_pi0 = abs(metrics.empirical_pi0 - pi0) / pi0
    err_dist = abs(metrics.empirical_mean_distance - mean_dist) / mean_dist
    ok = err_pi0 <= args.threshold and err_dist <= args.threshold
    stdout.write(
        f"k={args.k} samples={args.samples} seed={args.seed}\n"
        f"pi0 analytic={_num(pi0)} empirical={_num(metrics.empirical_pi0)} "
        f"rel_err={_num(err_pi0)}\n"
        f"mean_distance analytic={_num(mean_dist)} "
        f"empirical={_num(metrics.empirical_mean_distance)} rel_err={_num(err_dist)}\n"
        f"result={'PASS' if ok else 'FAIL'} threshold={_num(args.threshold)}\n"
    )
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="edgemig",
        description="Mobility-driven service migration: models, policies, simulation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="analytic metric sweep over k")
    p.add_argument("--k", default="2..7", help="ring range A..B (default 2..7)")
    p.add_argument("--k-max", type=int, default=8, help="largest allowed k")
    p.add_argument("--delay-coeff", type=float, default=0.02)
    p.add_argument("--rtt-coeff", type=float, default=0.01)
    p.add_argument("--objects-size", type=float, default=1e9)
    p.add_argument("--sig-size", type=float, default=0.0)
    p.add_argument("--mss", type=int, default=1460)
    p.add_argument("--w-max", type=int, default=512)
    p.add_argument("--p-loss", type=float, default=0.0)
    p.add_argument("--t-vm-conversion", type=float, default=0.0)
    p.add_argument("--out", default=None, help="directory for metrics_vs_k.csv")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("policy", help="optimal migration policy table")
    p.add_argument("--thr", type=int, default=10)
    p.add_argument("--tau", type=float, default=0.1)
    p.add_argument("--p", default="0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0")
    p.add_argument("--mu", type=float, default=mdp.DEFAULT_MU)
    p.add_argument("--gamma", type=float, default=mdp.DEFAULT_GAMMA)
    p.add_argument("--q-max", type=float, default=mdp.DEFAULT_Q_MAX)
    p.add_argument("--k-factor", type=float, default=mdp.DEFAULT_K_FACTOR)
    p.add_argument("--format", choices=("csv", "text"), default="text")
    p.add_argument("--out", default=None, help="directory for policy.csv")
    p.set_defaults(func=cmd_policy)

    p = sub.add_parser("simulate", help="run a scenario config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("validate", help="analytic vs Monte-Carlo cross-check")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threshold", type=float, default=0.02)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, sys.stdout)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
