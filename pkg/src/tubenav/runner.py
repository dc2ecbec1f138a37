"""Episode execution and batch orchestration with per-run file outputs."""

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from multiprocessing import get_context
from pathlib import Path

import numpy as np

from . import metrics as metrics_mod
from .config import ExperimentConfig
from .sim import RunLog, run_episode

NAV_METRICS = ("TD", "AV", "CR", "SF")
CALIB_METRICS = ("APR", "BS", "LL")


def run_dir_name(cfg: ExperimentConfig, seed: int) -> str:
    return f"run_{cfg.scenario}_{cfg.controller}_{cfg.loc_regime}_{cfg.pred_regime}_seed{seed}"


def run_one(cfg: ExperimentConfig, seed: int, out_dir=None, **collect) -> tuple[RunLog, dict]:
    """Run a single episode; optionally write steps.csv and summary.json."""
    log = run_episode(
        scenario=cfg.scenario,
        mppi_cfg=cfg.mppi_config(),
        predictor_cfg=cfg.predictor_config(),
        localizer_cfg=cfg.localizer_config(),
        seed=seed,
        world=cfg.world_config(),
        sfm=cfg.sfm_params(),
        footprint=cfg.footprint(),
        timeout=cfg.timeout,
        config_echo=cfg.echo(),
        **collect,
    )
    summary = metrics_mod.run_summary(log, cfg.world_config())
    summary["status"] = log.status
    summary["seed"] = seed
    if out_dir is not None:
        d = Path(out_dir) / run_dir_name(cfg, seed)
        d.mkdir(parents=True, exist_ok=True)
        log.write_csv(d / "steps.csv")
        log.write_summary(d / "summary.json", summary)
    return log, summary


def _worker(args):
    cfg, seed, out = args
    try:
        _, summary = run_one(cfg, seed, out)
        return seed, summary, None
    except Exception as exc:  # recorded per run, batch continues
        return seed, None, f"{type(exc).__name__}: {exc}"


@dataclass
class BatchResult:
    per_run: list
    aggregate: dict
    failures: dict
    wall_clock: float


def run_batch(cfg: ExperimentConfig, out_dir=None, workers: int | None = None) -> BatchResult:
    """Run cfg.runs episodes with seeds base..base+runs-1, possibly in parallel."""
    seeds = [cfg.base_seed + i for i in range(cfg.runs)]
    out = str(out_dir) if out_dir is not None else None
    n_workers = workers if workers is not None else cfg.workers
    if n_workers <= 0:
        import os

        n_workers = min(len(seeds), os.cpu_count() or 1)
    t0 = time.perf_counter()
    jobs = [(cfg, s, out) for s in seeds]
    if n_workers <= 1 or len(seeds) == 1:
        results = [_worker(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=n_workers, mp_context=get_context("spawn")) as pool:
            results = list(pool.map(_worker, jobs))
    wall = time.perf_counter() - t0

    results.sort(key=lambda r: r[0])
    per_run = []
    failures = {}
    for seed, summary, err in results:
        if err is not None:
            failures[seed] = err
        else:
            per_run.append(summary)
    aggregate = aggregate_cell(cfg, per_run)
    if out is not None:
        write_aggregate_csv(Path(out) / "aggregate.csv", [aggregate])
        (Path(out) / "table.txt").write_text(render_table([aggregate]))
    return BatchResult(per_run=per_run, aggregate=aggregate, failures=failures, wall_clock=wall)


def aggregate_cell(cfg: ExperimentConfig, per_run: list) -> dict:
    """One aggregate row: nav metrics over successful runs, SR over all runs,
    calibration metrics both over successful and over all runs."""
    row = {
        "scenario": cfg.scenario,
        "variant": cfg.controller,
        "loc_regime": cfg.loc_regime,
        "pred_regime": cfg.pred_regime,
        "n_runs": len(per_run),
        "n_success": sum(1 for r in per_run if r["success"]),
    }
    row["SR"] = 100.0 * row["n_success"] / row["n_runs"] if per_run else float("nan")
    ok = [r for r in per_run if r["success"]]
    for m in NAV_METRICS + CALIB_METRICS:
        vals = np.array([r[m] for r in ok]) if ok else np.array([np.nan])
        row[f"{m}_mean"] = float(np.mean(vals))
        row[f"{m}_std"] = float(np.std(vals))
    for m in CALIB_METRICS:
        vals = np.array([r[m] for r in per_run]) if per_run else np.array([np.nan])
        row[f"{m}_all_mean"] = float(np.mean(vals))
        row[f"{m}_all_std"] = float(np.std(vals))
    row["fallback_steps_mean"] = (
        float(np.mean([r["fallback_steps"] for r in per_run])) if per_run else float("nan")
    )
    return row


AGG_COLUMNS = (
    ["scenario", "variant", "loc_regime", "pred_regime", "n_runs", "n_success", "SR"]
    + [f"{m}_{s}" for m in NAV_METRICS + CALIB_METRICS for s in ("mean", "std")]
    + [f"{m}_all_{s}" for m in CALIB_METRICS for s in ("mean", "std")]
    + ["fallback_steps_mean"]
)


def write_aggregate_csv(path, rows: list):
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=AGG_COLUMNS)
        w.writeheader()
        for row in rows:
            w.writerow({k: row.get(k, "") for k in AGG_COLUMNS})


def render_table(rows: list) -> str:
    """Human-readable mean (std) table over the standard column set."""
    header = (
        f"{'scenario':8} {'variant':8} {'loc':9} {'pred':9} "
        f"{'TD [s]':>16} {'AV [m/s]':>14} {'CR [%]':>14} {'SF':>18} {'SR [%]':>7} "
        f"{'APR [%]':>14} {'BS':>18} {'LL':>18}"
    )
    lines = [header, "-" * len(header)]
    for r in rows:
        def ms(m, scale=1.0, digits=2):
            return f"{scale * r[f'{m}_mean']:.{digits}f} ({scale * r[f'{m}_std']:.{digits}f})"

        lines.append(
            f"{r['scenario']:8} {r['variant']:8} {r['loc_regime']:9} {r['pred_regime']:9} "
            f"{ms('TD'):>16} {ms('AV'):>14} {ms('CR'):>14} {ms('SF'):>18} {r['SR']:7.2f} "
            f"{ms('APR', 100.0):>14} {ms('BS', 1.0, 4):>18} {ms('LL', 1.0, 4):>18}"
        )
    return "\n".join(lines) + "\n"


def collect_run_summaries(root) -> list:
    """Read back every run summary below root (recursive)."""
    summaries = []
    for path in sorted(Path(root).rglob("summary.json")):
        with open(path) as f:
            summaries.append(json.load(f))
    return summaries


def write_long_csv(path, summaries: list):
    """Plot-ready long format: metric, scenario, variant, regime, run, value."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["metric", "scenario", "variant", "regime", "run", "value"])
        for s in summaries:
            cfge = s.get("config", {})
            scenario = cfge.get("experiment.scenario", "?")
            variant = cfge.get("experiment.controller", "?")
            regime = f"{cfge.get('experiment.loc_regime', '?')}-{cfge.get('experiment.pred_regime', '?')}"
            for m in ("success",) + NAV_METRICS + CALIB_METRICS:
                w.writerow([m, scenario, variant, regime, s.get("seed"), s.get(m)])


def aggregate_from_summaries(summaries: list) -> list:
    """Group stored summaries into aggregate rows, one per experiment cell."""
    from collections import defaultdict

    cells = defaultdict(list)
    for s in summaries:
        cfge = s.get("config", {})
        key = (
            cfge.get("experiment.scenario", "?"),
            cfge.get("experiment.controller", "?"),
            cfge.get("experiment.loc_regime", "?"),
            cfge.get("experiment.pred_regime", "?"),
        )
        cells[key].append(s)
    rows = []
    for (scenario, variant, loc, pred), runs in sorted(cells.items()):
        stub = ExperimentConfig(
            scenario=scenario, controller=variant, loc_regime=loc, pred_regime=pred,
            runs=len(runs),
        )
        rows.append(aggregate_cell(stub, runs))
    return rows
