"""Navigation metrics, proper scoring rules, and estimator consistency."""

from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2

from .errors import ContractViolation
from .sim import RunLog, WorldConfig

LOG_LOSS_EPS = 1e-6


@dataclass
class NavSummary:
    success: bool
    td: float  # s
    av: float  # m/s
    cr: float  # % of steps
    sf: float  # summed robot-induced force magnitude
    partial: bool = False


@dataclass
class CalibSummary:
    apr: float
    bs: float
    ll: float
    n: int


@dataclass
class ConsistencyReport:
    nees: np.ndarray
    mean_nees: float
    l2: float
    bin_edges: np.ndarray
    density: np.ndarray


def nav_metrics(log: RunLog, world: WorldConfig | None = None) -> NavSummary:
    """Task duration, average velocity, collision rate, and social force.

    On success the episode is cut at goal-region entry; otherwise the full
    log counts and the summary is flagged partial.
    """
    world = world or WorldConfig()
    n = log.n_steps
    if n == 0:
        return NavSummary(False, 0.0, 0.0, 0.0, 0.0, partial=True)
    success = log.status == "success"
    td = float(log.t[-1])
    pts = np.vstack([np.asarray(log.start_pose[:2])[None, :], log.true_pose[:, :2]])
    seg = np.diff(pts, axis=0)
    path = float(np.sum(np.hypot(seg[:, 0], seg[:, 1])))
    av = path / td if td > 0 else 0.0
    cr = 100.0 * float(np.mean(log.collision))
    sf = float(np.sum(log.robot_social_force))
    return NavSummary(success, td, av, cr, sf, partial=not success)


def calib_metrics(log: RunLog) -> CalibSummary:
    preds = np.asarray(log.executed_risk, dtype=float)
    outcomes = np.asarray(log.collision, dtype=float)
    return CalibSummary(
        apr=apr(preds), bs=brier(preds, outcomes), ll=log_loss(preds, outcomes), n=len(preds)
    )


def brier(preds, outcomes) -> float:
    preds = np.asarray(preds, dtype=float)
    outcomes = np.asarray(outcomes, dtype=float)
    if preds.shape != outcomes.shape or preds.size == 0:
        raise ContractViolation("preds/outcomes must be equal-length and non-empty")
    return float(np.mean((preds - outcomes) ** 2))


def log_loss(preds, outcomes, eps: float = LOG_LOSS_EPS) -> float:
    preds = np.asarray(preds, dtype=float)
    outcomes = np.asarray(outcomes, dtype=float)
    if preds.shape != outcomes.shape or preds.size == 0:
        raise ContractViolation("preds/outcomes must be equal-length and non-empty")
    p = np.clip(preds, eps, 1.0 - eps)
    return float(-np.mean(outcomes * np.log(p) + (1.0 - outcomes) * np.log1p(-p)))


def apr(preds) -> float:
    preds = np.asarray(preds, dtype=float)
    if preds.size == 0:
        raise ContractViolation("empty prediction sequence")
    return float(np.mean(preds))


def nees_series(est_positions, true_positions, pos_covariances) -> np.ndarray:
    """Positional normalized estimation error squared, e^T Sigma^-1 e."""
    est = np.asarray(est_positions, dtype=float).reshape(-1, 2)
    true = np.asarray(true_positions, dtype=float).reshape(-1, 2)
    covs = np.asarray(pos_covariances, dtype=float).reshape(-1, 2, 2)
    e = est - true
    covs = covs + 1e-12 * np.eye(2)  # regularize near-singular reports
    det = covs[:, 0, 0] * covs[:, 1, 1] - covs[:, 0, 1] * covs[:, 1, 0]
    inv00 = covs[:, 1, 1] / det
    inv11 = covs[:, 0, 0] / det
    inv01 = -covs[:, 0, 1] / det
    return e[:, 0] ** 2 * inv00 + 2.0 * e[:, 0] * e[:, 1] * inv01 + e[:, 1] ** 2 * inv11


def l2_divergence(nees_values, bins: int = 48, upper: float = 12.0) -> float:
    """Squared-density distance between empirical NEES and the chi-square(2) law."""
    vals = np.asarray(nees_values, dtype=float)
    if vals.size < 100:
        raise ContractViolation("need at least 100 NEES values")
    edges = np.linspace(0.0, upper, bins + 1)
    counts, _ = np.histogram(vals, bins=edges)
    width = edges[1] - edges[0]
    density = counts / (vals.size * width)
    centers = 0.5 * (edges[:-1] + edges[1:])
    ref = chi2.pdf(centers, df=2)
    return float(np.sum((density - ref) ** 2 * width))


def consistency_report(nees_values, bins: int = 48, upper: float = 12.0) -> ConsistencyReport:
    vals = np.asarray(nees_values, dtype=float)
    edges = np.linspace(0.0, upper, bins + 1)
    counts, _ = np.histogram(vals, bins=edges)
    density = counts / (vals.size * (edges[1] - edges[0]))
    return ConsistencyReport(
        nees=vals,
        mean_nees=float(np.mean(vals)),
        l2=l2_divergence(vals, bins=bins, upper=upper),
        bin_edges=edges,
        density=density,
    )


def run_summary(log: RunLog, world: WorldConfig | None = None) -> dict:
    """Flat metric dict stored in each run's JSON summary."""
    nav = nav_metrics(log, world)
    cal = calib_metrics(log)
    return {
        "success": bool(nav.success),
        "TD": nav.td,
        "AV": nav.av,
        "CR": nav.cr,
        "SF": nav.sf,
        "APR": cal.apr,
        "BS": cal.bs,
        "LL": cal.ll,
        "steps": int(log.n_steps),
        "fallback_steps": int(np.sum(log.fallback)),
    }
