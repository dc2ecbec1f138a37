"""Command-line entry point: simulate, batch, report, verify-calibration,
bench-cycle, print-config."""

import argparse
import sys
from pathlib import Path

from .config import load_config, to_ini
from .errors import ConfigError, TubenavError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _add_config_args(p: argparse.ArgumentParser):
    p.add_argument("--config", help="INI config file")
    p.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
        help="override one config value (repeatable)",
    )
    p.add_argument("--scenario", help="scenario name (c3p3/c6p6/c9p9/empty)")
    p.add_argument("--controller", help="controller variant (vanilla/dra/ducct)")
    p.add_argument("--loc-regime", dest="loc_regime", help="localization regime")
    p.add_argument("--pred-regime", dest="pred_regime", help="prediction regime")
    p.add_argument("--profile", help="desk or paper scale")
    p.add_argument("--out", help="output directory")


def _build_config(args):
    overrides = list(args.overrides)
    for key in ("scenario", "controller", "loc_regime", "pred_regime", "profile", "out"):
        val = getattr(args, key, None)
        if val is not None:
            overrides.append(f"experiment.{key}={val}")
    if getattr(args, "seed", None) is not None:
        overrides.append(f"experiment.base_seed={args.seed}")
    if getattr(args, "seeds", None) is not None:
        overrides.append(f"experiment.runs={args.seeds}")
    if getattr(args, "base_seed", None) is not None:
        overrides.append(f"experiment.base_seed={args.base_seed}")
    if getattr(args, "workers", None) is not None:
        overrides.append(f"experiment.workers={args.workers}")
    return load_config(args.config, overrides)


def cmd_simulate(args) -> int:
    cfg = _build_config(args)
    from .runner import run_one

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _, summary = run_one(cfg, cfg.base_seed, out)
    print(f"status={summary['status']} TD={summary['TD']:.2f}s steps={summary['steps']}")
    return EXIT_OK


def cmd_batch(args) -> int:
    cfg = _build_config(args)
    from .runner import run_batch

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    result = run_batch(cfg, out)
    print((out / "table.txt").read_text(), end="")
    if result.failures:
        print(f"failed runs: {result.failures}", file=sys.stderr)
    print(f"{len(result.per_run)} runs in {result.wall_clock:.1f}s -> {out}")
    return EXIT_OK


def cmd_report(args) -> int:
    from .runner import aggregate_from_summaries, collect_run_summaries, render_table, write_aggregate_csv, write_long_csv

    summaries = []
    for root in args.runs:
        summaries.extend(collect_run_summaries(root))
    if not summaries:
        print("no run summaries found", file=sys.stderr)
        return EXIT_RUNTIME
    rows = aggregate_from_summaries(summaries)
    out = Path(args.out or "report")
    out.mkdir(parents=True, exist_ok=True)
    write_aggregate_csv(out / "aggregate.csv", rows)
    write_long_csv(out / "long.csv", summaries)
    table = render_table(rows)
    (out / "table.txt").write_text(table)
    print(table, end="")
    return EXIT_OK


def cmd_verify_calibration(args) -> int:
    cfg = _build_config(args)
    from .verify import verify_calibration

    out = Path(cfg.out)
    reports = verify_calibration(cfg, out, min_steps=args.min_steps)
    for name in sorted(reports):
        rep = reports[name]
        print(f"{name:22} mean NEES {rep.mean_nees:8.3f}  L2 {rep.l2:.4f}  n={rep.nees.size}")
    return EXIT_OK


def cmd_bench_cycle(args) -> int:
    cfg = _build_config(args)
    from .bench import bench_cycle, format_report

    out_path = Path(cfg.out) / "bench.json" if args.out else None
    report = bench_cycle(cfg, reps=args.reps, out_path=out_path)
    print(format_report(report), end="")
    return EXIT_OK


def cmd_print_config(args) -> int:
    cfg = _build_config(args)
    print(to_ini(cfg), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tubenav")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one episode and write its logs")
    _add_config_args(p)
    p.add_argument("--seed", type=int, help="episode seed")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("batch", help="run a seeded batch of episodes")
    _add_config_args(p)
    p.add_argument("--seeds", type=int, help="number of runs")
    p.add_argument("--base-seed", dest="base_seed", type=int, help="first seed")
    p.add_argument("--workers", type=int, help="parallel workers (0 = cpu count)")
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("report", help="aggregate stored runs into tables")
    p.add_argument("--runs", nargs="+", required=True, help="run directories")
    p.add_argument("--out", help="report output directory")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("verify-calibration", help="estimator consistency sweeps")
    _add_config_args(p)
    p.add_argument("--min-steps", dest="min_steps", type=int, default=10_000)
    p.set_defaults(func=cmd_verify_calibration)

    p = sub.add_parser("bench-cycle", help="time controller cycles and kernels")
    _add_config_args(p)
    p.add_argument("--reps", type=int, default=5)
    p.set_defaults(func=cmd_bench_cycle)

    p = sub.add_parser("print-config", help="print the resolved configuration")
    _add_config_args(p)
    p.set_defaults(func=cmd_print_config)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TubenavError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
