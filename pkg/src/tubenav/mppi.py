"""Sampling-based receding-horizon controller with soft and hard risk handling.

Three variants share the sampler, cost, and weighting machinery:

* ``vanilla``  -- no probabilistic risk; distance penalty to predicted
  obstacle mean paths.
* ``dra``      -- full Monte Carlo risk stage with the robot position
  treated as (numerically) deterministic.
* ``ducct``    -- same risk stage weighted by the analytic footprint
  coverage under the propagated localization tube.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import risk as risk_mod
from .dynamics import Control, StateBelief, UtParams, positional_block, ut_propagate_tube
from .errors import AllRolloutsRejected, ConfigError, ContractViolation, InvalidStateError
from .kernels import rollout_batch
from .streams import StreamTree

VARIANTS = ("vanilla", "dra", "ducct")

# robot position variance used by the dra variant: collapses the footprint
# coverage to the square indicator
DRA_POSITION_VAR = 1e-8


@dataclass
class MppiConfig:
    num_rollouts: int = 64
    horizon_steps: int = 40
    dt: float = 0.05
    noise_cov: np.ndarray = field(default_factory=lambda: np.diag([0.2**2, 0.3**2]))
    temperature: float = 0.25
    risk_penalty: float = 50.0
    chance_level: float = 0.95
    reject_threshold: float | None = None  # resolved to 1 - chance_level
    v_max: float = 1.0
    omega_max: float = 1.8
    variant: str = "ducct"
    mc_samples: int = 768
    # planning footprint half side; defaults to the full combined radius so
    # the square circumscribes the ground-truth collision disk
    half_side: float = 0.8
    # stage/terminal cost weights, scaled so the rollout cost spread matches
    # the temperature (healthy averaging); speed tracking carries most of
    # the cruise-velocity preference
    goal_weight: float = 0.01
    effort_weight: float = 0.001
    speed_weight: float = 0.03
    terminal_weight: float = 0.1
    ref_speed: float | None = None  # resolved to v_max
    speed_gate_radius: float = 2.0  # speed tracking off inside the goal region
    # vanilla obstacle penalty
    obstacle_weight: float = 20.0
    obstacle_influence: float = 1.5
    # stage cost aims at a carrot this far ahead toward the goal, which keeps
    # lateral feedback comparable to longitudinal progress noise
    goal_lookahead: float = 4.0
    ut: UtParams = field(default_factory=UtParams)

    def __post_init__(self):
        self.noise_cov = np.asarray(self.noise_cov, dtype=float).reshape(2, 2)
        if self.num_rollouts < 1 or self.horizon_steps < 1:
            raise ConfigError("num_rollouts and horizon_steps must be >= 1")
        if self.temperature <= 0 or self.risk_penalty < 0:
            raise ConfigError("temperature must be > 0 and risk_penalty >= 0")
        if not 0.0 < self.chance_level < 1.0:
            raise ConfigError("chance_level must lie in (0, 1)")
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")

    @property
    def risk_reject_threshold(self) -> float:
        return (1.0 - self.chance_level) if self.reject_threshold is None else self.reject_threshold

    @property
    def reference_speed(self) -> float:
        return self.v_max if self.ref_speed is None else self.ref_speed


@dataclass
class RolloutBatch:
    controls: np.ndarray  # (K, T, 2)
    trajectories: np.ndarray  # (K, T+1, 3)
    costs: np.ndarray  # (K,)
    risks: np.ndarray  # (K, T), column t is prediction step t+1
    rejected: np.ndarray  # (K,) bool


@dataclass
class CycleOutput:
    command: Control
    nominal: np.ndarray  # (T, 2) warm start for the next cycle
    executed_risk: float
    all_rejected_fallback: bool
    min_cost: float
    mean_cost: float
    ess: float
    n_rejected: int


def sample_controls(
    nominal: np.ndarray, cfg: MppiConfig, rng: np.random.Generator
) -> np.ndarray:
    """Perturb the nominal sequence with Gaussian noise, then clamp to limits."""
    K, T = cfg.num_rollouts, cfg.horizon_steps
    chol = np.linalg.cholesky(cfg.noise_cov + 1e-18 * np.eye(2))
    eps = rng.standard_normal((K, T, 2)) @ chol.T
    u = nominal[None, :, :] + eps
    u[:, :, 0] = np.clip(u[:, :, 0], -cfg.v_max, cfg.v_max)
    u[:, :, 1] = np.clip(u[:, :, 1], -cfg.omega_max, cfg.omega_max)
    return u


def trajectory_cost(trajectory: np.ndarray, controls: np.ndarray, goal, cfg: MppiConfig) -> float:
    """Stage + terminal cost of a single rollout (see cost_batch)."""
    return float(
        cost_batch(trajectory[None, :, :], controls[None, :, :], np.asarray(goal, float), cfg)[0]
    )


def cost_batch(
    traj: np.ndarray, controls: np.ndarray, goal: np.ndarray, cfg: MppiConfig,
    gate_center: np.ndarray | None = None,
) -> np.ndarray:
    """Quadratic goal-distance, control-effort, and gated speed-tracking cost.

    Speed tracking is active only outside the goal region radius (measured
    to gate_center, the true goal) so that a robot resting on the goal with
    zero controls has exactly zero cost.
    """
    K, T = controls.shape[0], controls.shape[1]
    if traj.shape[1] != T + 1:
        raise ContractViolation("trajectory must have T+1 states")
    gate_center = goal if gate_center is None else gate_center
    d2 = (traj[:, :, 0] - goal[0]) ** 2 + (traj[:, :, 1] - goal[1]) ** 2  # (K, T+1)
    goal_term = cfg.goal_weight * np.sum(d2[:, :T], axis=1)
    inv = np.linalg.inv(cfg.noise_cov)
    effort = cfg.effort_weight * np.einsum("kta,ab,ktb->k", controls, inv, controls)
    g2 = (traj[:, :T, 0] - gate_center[0]) ** 2 + (traj[:, :T, 1] - gate_center[1]) ** 2
    gate = g2 > cfg.speed_gate_radius**2
    speed = cfg.speed_weight * np.sum(gate * (controls[:, :, 0] - cfg.reference_speed) ** 2, axis=1)
    terminal = cfg.terminal_weight * d2[:, T]
    return goal_term + effort + speed + terminal


def obstacle_penalty(traj: np.ndarray, tube_means: np.ndarray, cfg: MppiConfig) -> np.ndarray:
    """Vanilla-variant penalty: quadratic ramp inside the influence radius.

    tube_means is (M, T+1, 2); trajectory step t is compared against the
    obstacle means at the same step.
    """
    if tube_means.size == 0:
        return np.zeros(traj.shape[0])
    d = traj[:, None, 1:, :2] - tube_means[None, :, 1:, :]  # (K, M, T, 2)
    dist = np.hypot(d[..., 0], d[..., 1])
    ramp = np.maximum(0.0, 1.0 - dist / cfg.obstacle_influence)
    return cfg.obstacle_weight * np.sum(ramp**2, axis=(1, 2))


def apply_risk(costs: np.ndarray, risks: np.ndarray, cfg: MppiConfig):
    """Soft risk penalty plus hard rejection; no-op for the vanilla variant."""
    if risks.shape[0] != costs.shape[0]:
        raise ContractViolation("costs/risks shape mismatch")
    if cfg.variant == "vanilla":
        return costs.copy(), np.zeros(costs.shape[0], dtype=bool)
    out = costs + cfg.risk_penalty * np.sum(risks, axis=1)
    rejected = np.max(risks, axis=1) > cfg.risk_reject_threshold
    return out, rejected


def weights(costs: np.ndarray, rejected: np.ndarray, temperature: float) -> np.ndarray:
    """Exponentiated-cost weights over non-rejected rollouts (min-shifted)."""
    if rejected.all():
        raise AllRolloutsRejected("no rollout satisfies the hard risk threshold")
    keep = ~rejected
    shifted = costs[keep] - costs[keep].min()
    ew = np.exp(-shifted / temperature)
    w = np.zeros(costs.shape[0])
    w[keep] = ew / ew.sum()
    return w


def update_and_shift(w: np.ndarray, controls: np.ndarray):
    """Weight-average the control sequences and shift for the next warm start."""
    u_star = np.einsum("k,ktc->tc", w, controls)
    command = Control(float(u_star[0, 0]), float(u_star[0, 1]))
    warm = np.vstack([u_star[1:], u_star[-1:]])
    return u_star, command, warm


def carrot_point(
    position: np.ndarray, goal: np.ndarray, lookahead: float, path_start=None
) -> np.ndarray:
    """Receding stage-cost target on the reference line toward the goal.

    With a path start the carrot sits on the start->goal segment ahead of
    the robot's projection (centerline tracking); otherwise it recedes along
    the robot->goal direction.
    """
    if lookahead <= 0.0:
        return goal
    if path_start is not None:
        u = goal - np.asarray(path_start, dtype=float)
        length = float(np.hypot(u[0], u[1]))
        if length < 1e-9:
            return goal
        u = u / length
        s = float((position - path_start) @ u)
        s = min(max(s, 0.0) + lookahead, length)
        return path_start + s * u
    d = goal - position
    dist = float(np.hypot(d[0], d[1]))
    if dist <= lookahead:
        return goal
    return position + (lookahead / dist) * d


def control_cycle(
    belief: StateBelief,
    tubes,
    goal,
    prev_nominal: np.ndarray,
    cfg: MppiConfig,
    streams: StreamTree,
    cycle: int,
    path_start=None,
) -> CycleOutput:
    """One receding-horizon update: sample, roll out, risk-gate, average."""
    goal = np.asarray(goal, dtype=float).reshape(2)
    mean = belief.mean
    if not np.all(np.isfinite([mean.x, mean.y, mean.psi])):
        raise InvalidStateError("belief mean is not finite")
    K, T = cfg.num_rollouts, cfg.horizon_steps

    controls = sample_controls(prev_nominal, cfg, streams.control_noise(cycle))
    traj = rollout_batch(
        mean.x, mean.y, mean.psi,
        np.ascontiguousarray(controls[:, :, 0]),
        np.ascontiguousarray(controls[:, :, 1]),
        cfg.dt,
    )
    local_goal = carrot_point(np.array([mean.x, mean.y]), goal, cfg.goal_lookahead, path_start)
    costs = cost_batch(traj, controls, local_goal, cfg, gate_center=goal)

    risks = np.zeros((K, T))
    if cfg.variant == "vanilla":
        if tubes:
            tube_means = np.array([tube.means for tube in tubes])
            costs = costs + obstacle_penalty(traj, tube_means, cfg)
    elif tubes:
        if cfg.variant == "ducct":
            tube = ut_propagate_tube(belief, prev_nominal, cfg.dt, cfg.ut)
            pos_covs = tube.positional()
        else:  # dra: robot treated as deterministic
            pos_covs = np.broadcast_to(DRA_POSITION_VAR * np.eye(2), (T + 1, 2, 2))
        for t in range(1, T + 1):
            region = risk_mod.sample_region(traj, t, cfg.half_side)
            samples = risk_mod.draw_samples(region, cfg.mc_samples, streams.risk_samples(cycle, t))
            joint = risk_mod.joint_point_occupancy(samples, tubes, t)
            if not np.any(joint > 0.0):
                continue
            risks[:, t - 1] = risk_mod.step_risk_batch(
                traj[:, t, :2], pos_covs[t], samples, joint, cfg.half_side
            )

    costs, rejected = apply_risk(costs, risks, cfg)

    if rejected.all():
        k_star = int(np.argmin(np.max(risks, axis=1)))
        u_star = controls[k_star]
        command = Control(float(u_star[0, 0]), float(u_star[0, 1]))
        warm = np.vstack([u_star[1:], u_star[-1:]])
        return CycleOutput(
            command=command,
            nominal=warm,
            executed_risk=float(risks[k_star, 0]),
            all_rejected_fallback=True,
            min_cost=float(costs.min()),
            mean_cost=float(costs.mean()),
            ess=1.0,
            n_rejected=K,
        )

    w = weights(costs, rejected, cfg.temperature)
    _, command, warm = update_and_shift(w, controls)
    executed = risk_mod.executed_step_risk(w, risks[:, 0])
    kept = costs[~rejected]
    return CycleOutput(
        command=command,
        nominal=warm,
        executed_risk=executed,
        all_rejected_fallback=False,
        min_cost=float(kept.min()),
        mean_cost=float(kept.mean()),
        ess=float(1.0 / np.sum(w**2)),
        n_rejected=int(rejected.sum()),
    )
