"""Monte Carlo joint collision probability over shared per-step sample sets.

Each sample stands for the obstacle probability mass in its grid cell
(pdf * cell_area, clamped to 1). Summing the joint obstacle occupancy
weighted by the analytic footprint coverage estimates the expected
obstacle mass swept by the uncertain footprint; in the deterministic-robot
limit this reduces to the obstacle mass inside the footprint square.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ContractViolation
from .occupancy import PositionBelief, eig2, occ_prob

# eigenvalue floor when inverting near-singular obstacle covariances
_PDF_EIG_FLOOR = 1e-12

# obstacles whose +/- CULL_SIGMAS box misses the sample region are skipped;
# neglected mass is below 1e-8
CULL_SIGMAS = 7.0


@dataclass(frozen=True)
class SampleRegion:
    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float

    def __post_init__(self):
        if not (self.x_hi > self.x_lo and self.y_hi > self.y_lo):
            raise ContractViolation("sample region must have positive extent")

    @property
    def area(self) -> float:
        return (self.x_hi - self.x_lo) * (self.y_hi - self.y_lo)


@dataclass
class RiskSampleSet:
    points: np.ndarray  # (N, 2)
    region: SampleRegion
    cell_area: float


@dataclass
class RiskProfile:
    """Per-rollout, per-step collision probabilities (K, T)."""

    risks: np.ndarray


def sample_region(rollout_positions: np.ndarray, t: int, half_side: float) -> SampleRegion:
    """Axis-aligned bounds of all rollout means at step t, inflated by the half side."""
    pos = np.asarray(rollout_positions)
    if pos.ndim != 3 or pos.shape[0] < 1:
        raise ContractViolation("rollout_positions must be (K, T+1, >=2)")
    xs = pos[:, t, 0]
    ys = pos[:, t, 1]
    return SampleRegion(
        x_lo=float(xs.min() - half_side),
        x_hi=float(xs.max() + half_side),
        y_lo=float(ys.min() - half_side),
        y_hi=float(ys.max() + half_side),
    )


def draw_samples(region: SampleRegion, n: int, rng: np.random.Generator) -> RiskSampleSet:
    """n uniform points over the region from the given deterministic stream."""
    if n < 1:
        raise ContractViolation("need at least one sample")
    u = rng.random((n, 2))
    pts = np.empty((n, 2))
    pts[:, 0] = region.x_lo + u[:, 0] * (region.x_hi - region.x_lo)
    pts[:, 1] = region.y_lo + u[:, 1] * (region.y_hi - region.y_lo)
    return RiskSampleSet(points=pts, region=region, cell_area=region.area / n)


def obstacle_kernel_params(means, covs, region: SampleRegion | None = None):
    """Precompute inverse-covariance terms and cull boxes for the joint kernel.

    Near-singular covariances are floored at the eigenvalue level so the
    density stays finite; with the per-cell clamp this reproduces the
    measure-zero limit. Obstacles entirely outside the region are dropped.
    """
    means = np.asarray(means, dtype=float).reshape(-1, 2)
    covs = np.asarray(covs, dtype=float).reshape(-1, 2, 2)
    m = means.shape[0]
    keep_means, inv_aa, inv_bb, inv_ab, norms, bboxes = [], [], [], [], [], []
    for o in range(m):
        frame = eig2(covs[o])
        lam1 = max(frame.lambda1, _PDF_EIG_FLOOR)
        lam2 = max(frame.lambda2, _PDF_EIG_FLOOR)
        rot = frame.rotation
        inv = rot @ np.diag([1.0 / lam1, 1.0 / lam2]) @ rot.T
        # axis stds of the floored covariance in world frame
        sx = CULL_SIGMAS * np.sqrt(lam1 * rot[0, 0] ** 2 + lam2 * rot[0, 1] ** 2)
        sy = CULL_SIGMAS * np.sqrt(lam1 * rot[1, 0] ** 2 + lam2 * rot[1, 1] ** 2)
        box = (means[o, 0] - sx, means[o, 0] + sx, means[o, 1] - sy, means[o, 1] + sy)
        if region is not None and (
            box[1] < region.x_lo or box[0] > region.x_hi or box[3] < region.y_lo or box[2] > region.y_hi
        ):
            continue
        keep_means.append(means[o])
        inv_aa.append(inv[0, 0])
        inv_bb.append(inv[1, 1])
        inv_ab.append(inv[0, 1])
        norms.append(1.0 / (2.0 * np.pi * np.sqrt(lam1 * lam2)))
        bboxes.append(box)
    if not keep_means:
        return (
            np.zeros((0, 2)), np.zeros(0), np.zeros(0), np.zeros(0), np.zeros(0),
            np.zeros((0, 4)),
        )
    return (
        np.array(keep_means),
        np.array(inv_aa),
        np.array(inv_bb),
        np.array(inv_ab),
        np.array(norms),
        np.array(bboxes),
    )


def joint_point_occupancy(samples: RiskSampleSet, tubes, t: int) -> np.ndarray:
    """Joint obstacle occupancy 1 - prod(1 - p_o) at every sample point."""
    means = np.array([tube.means[t] for tube in tubes]).reshape(-1, 2)
    covs = np.array([tube.covs[t] for tube in tubes]).reshape(-1, 2, 2)
    m, iaa, ibb, iab, norms, boxes = obstacle_kernel_params(means, covs, samples.region)
    return kernels.joint_occupancy(
        samples.points[:, 0], samples.points[:, 1], m, iaa, ibb, iab, norms, boxes,
        samples.cell_area,
    )


def rollout_collision_prob(
    rollout_pos_t, pos_cov_t, samples: RiskSampleSet, joint: np.ndarray, half_side: float
) -> float:
    """Footprint-weighted sum of the joint occupancy for one rollout position."""
    if joint.shape[0] != samples.points.shape[0]:
        raise ContractViolation("joint length does not match sample set")
    belief = PositionBelief(mean=np.asarray(rollout_pos_t, dtype=float), cov=pos_cov_t)
    occ = occ_prob(samples.points, belief, half_side)
    return float(np.clip(np.sum(joint * occ), 0.0, 1.0))


def step_risk_batch(
    rollout_xy: np.ndarray, pos_cov: np.ndarray, samples: RiskSampleSet, joint: np.ndarray,
    half_side: float,
) -> np.ndarray:
    """Kernel-backed rollout_collision_prob for all K rollouts at one step.

    Shares the principal frame of the common positional covariance across
    rollouts; samples are sorted along the leading axis once so each
    rollout reduces over a contiguous window.
    """
    frame = eig2(pos_cov)
    rot = frame.rotation
    xi = samples.points @ rot  # rows are R^T p
    c = np.asarray(rollout_xy, dtype=float).reshape(-1, 2) @ rot
    order = np.argsort(xi[:, 0], kind="stable")
    return kernels.occ_weighted_risk(
        np.ascontiguousarray(xi[order, 0]),
        np.ascontiguousarray(xi[order, 1]),
        np.ascontiguousarray(joint[order]),
        np.ascontiguousarray(c[:, 0]),
        np.ascontiguousarray(c[:, 1]),
        frame.lambda1,
        frame.lambda2,
        half_side,
    )


def executed_step_risk(weights: np.ndarray, risks_step1: np.ndarray) -> float:
    """Importance-weighted average of first-prediction-step rollout risks."""
    weights = np.asarray(weights, dtype=float)
    risks_step1 = np.asarray(risks_step1, dtype=float)
    if weights.shape != risks_step1.shape:
        raise ContractViolation("weights/risks length mismatch")
    if abs(weights.sum() - 1.0) > 1e-9:
        raise ContractViolation(f"weights must sum to 1, got {weights.sum()!r}")
    return float(weights @ risks_step1)
