"""Consistency sweeps: do the configured regimes produce the intended
relationship between reported covariances and empirical errors?"""

import json
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import metrics as metrics_mod
from .config import ExperimentConfig, REGIMES
from .prediction import covariance_path
from .runner import run_one

# prediction horizons (in steps) pooled into the predictor NEES
PRED_HORIZONS = (5, 10, 20, 40)


def localizer_nees(cfg: ExperimentConfig, regime: str, min_steps: int = 10_000, max_runs: int = 40):
    """Pool positional NEES from closed-loop episodes until min_steps rows."""
    cfg = replace(cfg, loc_regime=regime)
    vals = []
    seed = cfg.base_seed
    runs = 0
    while sum(len(v) for v in vals) < min_steps and runs < max_runs:
        log, _ = run_one(cfg, seed)
        covs = np.zeros((log.n_steps, 2, 2))
        covs[:, 0, 0] = log.cov_entries[:, 0]
        covs[:, 0, 1] = log.cov_entries[:, 1]
        covs[:, 1, 0] = log.cov_entries[:, 1]
        covs[:, 1, 1] = log.cov_entries[:, 2]
        vals.append(metrics_mod.nees_series(log.est_pose[:, :2], log.true_pose[:, :2], covs))
        seed += 1
        runs += 1
    return np.concatenate(vals)


def predictor_nees(cfg: ExperimentConfig, stride: int = 10, max_runs: int = 6):
    """Prediction NEES per regime from one set of episodes.

    The mean path is regime-independent, so prediction errors are collected
    once and scored against each regime's reported covariance path.
    """
    errors = {h: [] for h in PRED_HORIZONS}
    for i in range(max_runs):
        log, _ = run_one(
            cfg, cfg.base_seed + i,
            collect_pedestrians=True, collect_predictions_stride=stride,
        )
        if log.ped_positions is None or not log.predictions:
            continue
        n = log.ped_positions.shape[0]
        for cycle, means in log.predictions:
            for h in PRED_HORIZONS:
                idx = cycle + h - 1  # position reached h steps after the prediction
                if idx >= n or means.size == 0:
                    continue
                errors[h].append(means[:, h, :] - log.ped_positions[idx])
    out = {}
    for regime in REGIMES:
        pcfg = replace(cfg, pred_regime=regime).predictor_config()
        covs = covariance_path(pcfg)
        nees = []
        for h in PRED_HORIZONS:
            if not errors[h]:
                continue
            e = np.concatenate(errors[h], axis=0)
            var = covs[h, 0, 0]  # isotropic by construction
            nees.append((e[:, 0] ** 2 + e[:, 1] ** 2) / var)
        out[regime] = np.concatenate(nees) if nees else np.zeros(0)
    return out


def verify_calibration(cfg: ExperimentConfig, out_dir, min_steps: int = 10_000) -> dict:
    """Run localizer and predictor consistency sweeps and write reports.

    Episodes use the configured scenario with the vanilla controller (the
    sweep characterizes the estimators, not the planner).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    base = replace(cfg, controller="vanilla")
    reports = {}
    for regime in REGIMES:
        vals = localizer_nees(base, regime, min_steps=min_steps)
        reports[f"localizer/{regime}"] = metrics_mod.consistency_report(vals)
    for regime, vals in predictor_nees(base).items():
        if vals.size >= 100:
            reports[f"predictor/{regime}"] = metrics_mod.consistency_report(vals)

    summary = {}
    for name, rep in reports.items():
        module, regime = name.split("/")
        stem = f"nees_{module}_{regime}"
        summary[name] = {"mean_nees": rep.mean_nees, "l2": rep.l2, "n": int(rep.nees.size)}
        centers = 0.5 * (rep.bin_edges[:-1] + rep.bin_edges[1:])
        from scipy.stats import chi2

        with open(out_dir / f"{stem}.csv", "w") as f:
            f.write("bin_center,density,chi2_density\n")
            for c, d, r in zip(centers, rep.density, chi2.pdf(centers, df=2)):
                f.write(f"{c!r},{d!r},{r!r}\n")
    with open(out_dir / "consistency.json", "w") as f:
        json.dump(summary, f, indent=1, sort_keys=True)
        f.write("\n")
    return reports
