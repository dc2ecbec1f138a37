"""Control-cycle latency benchmark at configurable scale.

Times full controller cycles on the active kernel backend and the isolated
hot kernels on both backends, so the jitted and pure-numpy paths can be
compared directly.
"""

import json
import time
from pathlib import Path

import numpy as np

from . import kernels_numba, kernels_numpy
from .backend import NUMBA_AVAILABLE, backend_name
from .config import ExperimentConfig
from .dynamics import RobotState, StateBelief
from .mppi import control_cycle
from .prediction import PedestrianTrack, covariance_path, predict_with_covs
from .sim import make_scenario
from .streams import StreamTree

CYCLE_TARGET_MS = 50.0  # 20 Hz control budget


def _synthetic_inputs(cfg: ExperimentConfig):
    mppi_cfg = cfg.mppi_config()
    pred_cfg = cfg.predictor_config()
    world = cfg.world_config()
    _, peds = make_scenario("c9p9", seed=0, world=world)
    covs = covariance_path(pred_cfg)
    tubes = []
    for i, ped in enumerate(peds):
        track = PedestrianTrack(id=i, position=ped.position, velocity=ped.velocity)
        tubes.append(predict_with_covs(track, ped.waypoints, pred_cfg, covs))
    belief = StateBelief(
        mean=RobotState(6.0, 3.0, 0.0),
        cov=np.diag([0.02**2 + 0.01, 0.02**2 + 0.01, 0.02**2 + 0.002]),
    )
    nominal = np.tile([mppi_cfg.v_max, 0.0], (mppi_cfg.horizon_steps, 1))
    goal = np.asarray(world.goal, dtype=float)
    return mppi_cfg, belief, tubes, goal, nominal


def bench_cycle(cfg: ExperimentConfig, reps: int = 5, out_path=None) -> dict:
    """Median/p95 latency of control_cycle plus per-backend kernel timings."""
    mppi_cfg, belief, tubes, goal, nominal = _synthetic_inputs(cfg)
    streams = StreamTree(cfg.base_seed)
    from .kernels import warmup

    warmup()
    control_cycle(belief, tubes, goal, nominal, mppi_cfg, streams, 0)  # warm path
    times = []
    for cycle in range(1, reps + 1):
        t0 = time.perf_counter()
        control_cycle(belief, tubes, goal, nominal, mppi_cfg, streams, cycle)
        times.append(time.perf_counter() - t0)
    times_ms = 1000.0 * np.array(times)
    median = float(np.median(times_ms))
    report = {
        "backend": backend_name(),
        "profile": cfg.profile,
        "num_rollouts": mppi_cfg.num_rollouts,
        "horizon_steps": mppi_cfg.horizon_steps,
        "mc_samples": mppi_cfg.mc_samples,
        "n_pedestrians": len(tubes),
        "reps": reps,
        "cycle_ms_median": median,
        "cycle_ms_p95": float(np.percentile(times_ms, 95)),
        "target_ms": CYCLE_TARGET_MS,
        "meets_target": bool(median <= CYCLE_TARGET_MS),
        "kernels": bench_kernels(mppi_cfg.mc_samples, mppi_cfg.num_rollouts),
    }
    if out_path is not None:
        Path(out_path).parent.mkdir(parents=True, exist_ok=True)
        with open(out_path, "w") as f:
            json.dump(report, f, indent=1, sort_keys=True)
            f.write("\n")
    return report


def bench_kernels(n_samples: int, n_rollouts: int, reps: int = 5) -> dict:
    """Time the risk kernels on both backends at the given scale."""
    rng = np.random.default_rng(0)
    xi1 = np.sort(rng.uniform(0.0, 4.0, n_samples))
    xi2 = rng.uniform(0.0, 3.0, n_samples)
    joint = rng.uniform(0.0, 0.05, n_samples)
    c1 = rng.uniform(0.5, 3.5, n_rollouts)
    c2 = rng.uniform(0.5, 2.5, n_rollouts)
    means = rng.uniform(0.0, 4.0, (18, 2))
    covs = np.tile(0.09 * np.eye(2), (18, 1, 1))
    from .risk import obstacle_kernel_params

    m, iaa, ibb, iab, norms, boxes = obstacle_kernel_params(means, covs)

    out = {}
    backends = {"numpy": kernels_numpy}
    if NUMBA_AVAILABLE:
        backends["numba"] = kernels_numba
    for name, mod in backends.items():
        mod.warmup()
        mod.occ_weighted_risk(xi1, xi2, joint, c1, c2, 0.01, 0.01, 0.4)
        t_occ, t_joint = [], []
        for _ in range(reps):
            t0 = time.perf_counter()
            mod.occ_weighted_risk(xi1, xi2, joint, c1, c2, 0.01, 0.01, 0.4)
            t_occ.append(time.perf_counter() - t0)
            t0 = time.perf_counter()
            mod.joint_occupancy(xi1, xi2, m, iaa, ibb, iab, norms, boxes, 1e-4)
            t_joint.append(time.perf_counter() - t0)
        out[name] = {
            "occ_weighted_risk_ms": float(np.median(t_occ) * 1000.0),
            "joint_occupancy_ms": float(np.median(t_joint) * 1000.0),
        }
    return out


def format_report(report: dict) -> str:
    lines = [
        f"backend={report['backend']} profile={report['profile']} "
        f"K={report['num_rollouts']} T={report['horizon_steps']} "
        f"N_MC={report['mc_samples']} pedestrians={report['n_pedestrians']}",
        f"cycle latency: median {report['cycle_ms_median']:.1f} ms, "
        f"p95 {report['cycle_ms_p95']:.1f} ms "
        f"(target {report['target_ms']:.0f} ms: {'met' if report['meets_target'] else 'NOT met'})",
    ]
    for name, k in report["kernels"].items():
        lines.append(
            f"kernels[{name}]: occ_weighted_risk {k['occ_weighted_risk_ms']:.2f} ms, "
            f"joint_occupancy {k['joint_occupancy_ms']:.2f} ms (one step)"
        )
    return "\n".join(lines) + "\n"
