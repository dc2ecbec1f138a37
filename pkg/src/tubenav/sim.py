"""Closed-loop corridor world: pedestrians, plant, localizer, episodes.

The plant is deterministic; all stochasticity lives in the simulated
localizer, whose reported covariance can be scaled away from the injected
noise level to realize standard / underconfident / overconfident regimes.
"""

import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import prediction
from .backend import backend_name
from .dynamics import Control, RobotState, StateBelief, step, wrap_angle
from .errors import ConfigError, ContractViolation
from .mppi import MppiConfig, control_cycle
from .occupancy import FootprintSpec
from .streams import StreamTree

SCENARIO_COUNTS = {"c3p3": (3, 3), "c6p6": (6, 6), "c9p9": (9, 9)}

LOC_ALPHAS = {"standard": 0.2, "under": 0.4, "over": 1e-3}
PRED_SETUPS = {"standard": (0.01, 1.0), "under": (0.05, 1.2), "over": (1e-4, 1.0)}

# body-frame odometry noise: sigma_xy = alpha*(trans + XY_ROT_GAIN*rot),
# sigma_psi = alpha*(rot + PSI_TRANS_GAIN*trans)
XY_ROT_GAIN = 0.1
PSI_TRANS_GAIN = 0.05


@dataclass
class WorldConfig:
    width: float = 6.0
    length: float = 40.0
    start: tuple = (2.0, 3.0, 0.0)
    goal: tuple = (38.0, 3.0)
    goal_radius: float = 2.0

    def __post_init__(self):
        sx, sy, _ = self.start
        gx, gy = self.goal
        if not (0 < sy < self.width and 0 < gy < self.width):
            raise ConfigError("start/goal must lie inside the corridor")
        if not 0 <= sx <= self.length and 0 <= gx <= self.length:
            raise ConfigError("start/goal must lie inside the corridor")


@dataclass
class SfmParams:
    tau: float = 0.5
    ped_repulsion: float = 2.1  # m/s^2
    ped_range: float = 0.35  # m
    wall_repulsion: float = 5.0
    wall_range: float = 0.1
    r_ped: float = 0.5
    r_robot: float = 0.3
    desired_speed: float = 1.0
    max_speed: float = 1.5
    r_goal: float = 0.3


@dataclass
class LocalizerConfig:
    regime: str = "standard"
    alpha: float | None = None  # resolved from regime when None
    true_alpha: float = 0.2
    init_cov: np.ndarray = field(
        default_factory=lambda: np.diag([0.05**2, 0.05**2, 0.02**2])
    )
    # weak absolute anchoring (map-based correction), applied only while
    # moving; keeps dead-reckoning drift bounded without hiding it
    meas_sigma_pos: float = 3.0
    meas_sigma_psi: float = 0.5

    def __post_init__(self):
        if self.regime not in LOC_ALPHAS:
            raise ConfigError(f"unknown localization regime {self.regime!r}")
        if self.alpha is None:
            self.alpha = LOC_ALPHAS[self.regime]
        if self.alpha <= 0:
            raise ConfigError("alpha must be positive")
        self.init_cov = np.asarray(self.init_cov, dtype=float).reshape(3, 3)


@dataclass
class Pedestrian:
    position: np.ndarray
    velocity: np.ndarray
    waypoints: np.ndarray  # cyclic (k, 2)
    goal_idx: int = 0

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(2)
        self.velocity = np.asarray(self.velocity, dtype=float).reshape(2)
        self.waypoints = np.asarray(self.waypoints, dtype=float).reshape(-1, 2)


@dataclass
class ScenarioSpec:
    name: str
    n_crossing: int
    n_passing: int
    seed: int


def sfm_step(pedestrians, robot_pos, world: WorldConfig, params: SfmParams, dt: float):
    """Advance all pedestrians one step; returns the robot-induced force sum.

    The robot repels pedestrians exactly like another pedestrian obstacle
    with the combined radius. Velocities are clipped to the maximum speed.
    """
    n = len(pedestrians)
    if n == 0:
        return 0.0
    pos = np.array([p.position for p in pedestrians])
    vel = np.array([p.velocity for p in pedestrians])
    goals = np.array([p.waypoints[p.goal_idx % len(p.waypoints)] for p in pedestrians])

    to_goal = goals - pos
    dist_goal = np.hypot(to_goal[:, 0], to_goal[:, 1])
    e = np.where(dist_goal[:, None] > 1e-12, to_goal / np.maximum(dist_goal, 1e-12)[:, None], 0.0)
    acc = (params.desired_speed * e - vel) / params.tau

    if n > 1:
        d = pos[:, None, :] - pos[None, :, :]
        dist = np.hypot(d[..., 0], d[..., 1])
        np.fill_diagonal(dist, np.inf)
        mag = params.ped_repulsion * np.exp((2.0 * params.r_ped - dist) / params.ped_range)
        acc += np.sum((mag / dist)[..., None] * d, axis=1)

    # side walls at y=0 and y=width
    acc[:, 1] += params.wall_repulsion * np.exp((params.r_ped - pos[:, 1]) / params.wall_range)
    acc[:, 1] -= params.wall_repulsion * np.exp(
        (params.r_ped - (world.width - pos[:, 1])) / params.wall_range
    )

    dr = pos - np.asarray(robot_pos, dtype=float)[None, :2]
    dist_r = np.maximum(np.hypot(dr[:, 0], dr[:, 1]), 1e-12)
    mag_r = params.ped_repulsion * np.exp(((params.r_ped + params.r_robot) - dist_r) / params.ped_range)
    f_robot = (mag_r / dist_r)[:, None] * dr
    acc += f_robot

    vel = vel + acc * dt
    speed = np.hypot(vel[:, 0], vel[:, 1])
    over = speed > params.max_speed
    vel[over] *= (params.max_speed / speed[over])[:, None]
    pos = pos + vel * dt

    for i, ped in enumerate(pedestrians):
        ped.position = pos[i]
        ped.velocity = vel[i]
        g = ped.waypoints[ped.goal_idx % len(ped.waypoints)]
        if np.hypot(*(pos[i] - g)) < params.r_goal:
            ped.goal_idx = (ped.goal_idx + 1) % len(ped.waypoints)
    return float(np.sum(np.hypot(f_robot[:, 0], f_robot[:, 1])))


def plant_step(true_state: RobotState, command: Control, dt: float, cfg: MppiConfig) -> RobotState:
    """Deterministic plant: clamped command through the motion model."""
    v = float(np.clip(command.v, -cfg.v_max, cfg.v_max))
    w = float(np.clip(command.omega, -cfg.omega_max, cfg.omega_max))
    return step(true_state, Control(v, w), dt)


def localizer_step(
    prev_belief: StateBelief, increment, cfg: LocalizerConfig, rng: np.random.Generator,
    true_pose=None,
) -> StateBelief:
    """Compound one noisy odometry increment into the belief.

    Noise is injected at intensity true_alpha; the reported covariance is
    propagated at intensity alpha, so the two differ exactly by the regime
    miscalibration. When the true pose is supplied and the increment is
    non-zero, a weak absolute correction with the (correctly reported)
    measurement noise keeps the drift bounded; a zero increment always
    leaves the belief unchanged.
    """
    dx, dy, dpsi = (float(v) for v in increment)
    trans = float(np.hypot(dx, dy))
    rot = abs(dpsi)
    s_xy_true = cfg.true_alpha * (trans + XY_ROT_GAIN * rot)
    s_psi_true = cfg.true_alpha * (rot + PSI_TRANS_GAIN * trans)
    noise = rng.standard_normal(3) * np.array([s_xy_true, s_xy_true, s_psi_true])
    mx, my, mpsi = dx + noise[0], dy + noise[1], dpsi + noise[2]

    psi = prev_belief.mean.psi
    c, s = np.cos(psi), np.sin(psi)
    wx = c * mx - s * my
    wy = s * mx + c * my
    mean = np.array(
        [prev_belief.mean.x + wx, prev_belief.mean.y + wy, wrap_angle(psi + mpsi)]
    )

    trans_m = float(np.hypot(mx, my))
    rot_m = abs(mpsi)
    s_xy = cfg.alpha * (trans_m + XY_ROT_GAIN * rot_m)
    s_psi = cfg.alpha * (rot_m + PSI_TRANS_GAIN * trans_m)
    q = np.diag([s_xy**2, s_xy**2, s_psi**2])
    fx = np.array([[1.0, 0.0, -wy], [0.0, 1.0, wx], [0.0, 0.0, 1.0]])
    fu = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    cov = fx @ prev_belief.cov @ fx.T + fu @ q @ fu.T

    moving = trans > 1e-9 or rot > 1e-9
    if true_pose is not None and moving:
        r_meas = np.diag([cfg.meas_sigma_pos**2, cfg.meas_sigma_pos**2, cfg.meas_sigma_psi**2])
        meas_noise = rng.standard_normal(3) * np.array(
            [cfg.meas_sigma_pos, cfg.meas_sigma_pos, cfg.meas_sigma_psi]
        )
        z = np.asarray(true_pose, dtype=float) + meas_noise
        innov = z - mean
        innov[2] = wrap_angle(innov[2])
        gain = cov @ np.linalg.inv(cov + r_meas)
        mean = mean + gain @ innov
        mean[2] = wrap_angle(mean[2])
        ikh = np.eye(3) - gain
        cov = ikh @ cov @ ikh.T + gain @ r_meas @ gain.T  # Joseph form
    else:
        # keep the stream layout fixed so regimes stay comparable
        rng.standard_normal(3)

    return StateBelief(
        mean=RobotState(float(mean[0]), float(mean[1]), float(mean[2])),
        cov=0.5 * (cov + cov.T),
    )


def ground_truth_collision(robot_pos, pedestrians, footprint: FootprintSpec) -> bool:
    """True iff some pedestrian is strictly closer than the combined radius."""
    return min_pedestrian_distance(robot_pos, pedestrians) < footprint.l_combined


def min_pedestrian_distance(robot_pos, pedestrians) -> float:
    if not pedestrians:
        return float("inf")
    p = np.asarray(robot_pos, dtype=float)[:2]
    d = [float(np.hypot(*(ped.position - p))) for ped in pedestrians]
    return min(d)


def make_scenario(name: str, seed: int, world: WorldConfig | None = None):
    """Deterministic pedestrian spawn for a named density scenario.

    Passing pedestrians walk the corridor against the robot's travel
    direction on staggered lanes; crossing pedestrians shuttle across the
    width at staggered stations. Positions are jittered by the seed.
    """
    if name not in SCENARIO_COUNTS:
        raise ConfigError(f"unknown scenario {name!r}; expected one of {sorted(SCENARIO_COUNTS)}")
    world = world or WorldConfig()
    n_cross, n_pass = SCENARIO_COUNTS[name]
    rng = StreamTree(seed).scenario()
    start_xy = np.array(world.start[:2])
    peds = []

    for i in range(n_cross):
        frac = i / (n_cross - 1) if n_cross > 1 else 0.5
        x = 8.0 + 24.0 * frac + rng.uniform(-1.0, 1.0)
        low = i % 2 == 0
        y = (1.2 if low else world.width - 1.2) + rng.uniform(-0.3, 0.3)
        far_y, near_y = (world.width - 0.8, 0.8) if low else (0.8, world.width - 0.8)
        if np.hypot(*(np.array([x, y]) - start_xy)) < 2.5:
            x += 4.0
        wps = np.array([[x, far_y], [x, near_y]])
        direction = (wps[0] - np.array([x, y]))
        direction /= max(np.hypot(*direction), 1e-12)
        peds.append(Pedestrian(position=[x, y], velocity=direction, waypoints=wps))

    lanes = [1.5, 3.0, 4.5]
    for j in range(n_pass):
        frac = j / (n_pass - 1) if n_pass > 1 else 0.5
        x = 34.0 - 20.0 * frac + rng.uniform(-1.0, 1.0)
        y = lanes[j % 3] + rng.uniform(-0.3, 0.3)
        if np.hypot(*(np.array([x, y]) - start_xy)) < 2.5:
            x += 4.0
        wps = np.array([[2.0, y], [world.length - 2.0, y]])
        direction = wps[0] - np.array([x, y])
        direction /= max(np.hypot(*direction), 1e-12)
        peds.append(Pedestrian(position=[x, y], velocity=direction, waypoints=wps))

    return ScenarioSpec(name=name, n_crossing=n_cross, n_passing=n_pass, seed=seed), peds


CSV_HEADER = (
    "t,true_x,true_y,true_psi,est_x,est_y,est_psi,cov_xx,cov_xy,cov_yy,cov_pp,"
    "cmd_v,cmd_w,executed_risk,collision,min_ped_dist,robot_social_force,all_rejected_flag"
)


@dataclass
class RunLog:
    """Complete per-step record of one closed-loop episode."""

    status: str
    t: np.ndarray
    true_pose: np.ndarray
    est_pose: np.ndarray
    cov_entries: np.ndarray  # sigma_xx, sigma_xy, sigma_yy, sigma_psipsi
    cmd: np.ndarray
    executed_risk: np.ndarray
    collision: np.ndarray
    min_ped_dist: np.ndarray
    robot_social_force: np.ndarray
    fallback: np.ndarray
    seed: int
    config_echo: dict
    start_pose: np.ndarray = field(default_factory=lambda: np.zeros(3))
    ped_positions: np.ndarray | None = None  # (n, P, 2) when collected
    predictions: list | None = None  # [(cycle, means (P, T+1, 2))] when collected

    @property
    def n_steps(self) -> int:
        return len(self.t)

    def write_csv(self, path):
        with open(path, "w") as f:
            f.write(CSV_HEADER + "\n")
            for i in range(self.n_steps):
                row = [
                    self.t[i],
                    *self.true_pose[i],
                    *self.est_pose[i],
                    *self.cov_entries[i],
                    *self.cmd[i],
                    self.executed_risk[i],
                ]
                cells = [repr(float(v)) for v in row]
                cells.append("1" if self.collision[i] else "0")
                cells.append(repr(float(self.min_ped_dist[i])))
                cells.append(repr(float(self.robot_social_force[i])))
                cells.append("1" if self.fallback[i] else "0")
                f.write(",".join(cells) + "\n")

    def write_summary(self, path, summary: dict):
        payload = {
            "status": self.status,
            "seed": self.seed,
            "backend": backend_name(),
            **summary,
            "config": self.config_echo,
        }
        with open(path, "w") as f:
            json.dump(payload, f, indent=1, sort_keys=True)
            f.write("\n")


def read_runlog_csv(path) -> dict:
    """Load a per-step CSV back into named arrays."""
    data = np.genfromtxt(path, delimiter=",", names=True)
    data = np.atleast_1d(data)
    return {name: np.asarray(data[name]) for name in data.dtype.names}


def run_episode(
    scenario: str,
    mppi_cfg: MppiConfig,
    predictor_cfg: prediction.PredictorConfig,
    localizer_cfg: LocalizerConfig,
    seed: int,
    world: WorldConfig | None = None,
    sfm: SfmParams | None = None,
    footprint: FootprintSpec | None = None,
    timeout: float = 120.0,
    config_echo: dict | None = None,
    collect_pedestrians: bool = False,
    collect_predictions_stride: int = 0,
) -> RunLog:
    """Run one closed-loop episode at the synchronous 1/dt control rate.

    Per step: predict pedestrian tubes from tracked ground-truth positions,
    run one controller cycle on the current belief, advance the plant and
    the crowd, then compound odometry into the next belief. The logged
    risk of each row is the prediction made for that row's transition.
    """
    world = world or WorldConfig()
    sfm = sfm or SfmParams()
    footprint = footprint or FootprintSpec()
    _, peds = make_scenario(scenario, seed, world) if scenario != "empty" else (None, [])
    streams = StreamTree(seed)
    dt = mppi_cfg.dt
    goal = np.asarray(world.goal, dtype=float)

    true_state = RobotState(*world.start)
    init_rng = streams.init_belief()
    init_err = init_rng.multivariate_normal(np.zeros(3), localizer_cfg.init_cov)
    belief = StateBelief(
        mean=RobotState(
            true_state.x + init_err[0],
            true_state.y + init_err[1],
            float(wrap_angle(true_state.psi + init_err[2])),
        ),
        cov=localizer_cfg.init_cov.copy(),
    )
    nominal = np.zeros((mppi_cfg.horizon_steps, 2))
    shared_covs = prediction.covariance_path(predictor_cfg)

    hist_len = max(2, int(round(0.5 / dt)) + 1)
    hist_t = [[0.0] for _ in peds]
    hist_p = [[p.position.copy()] for p in peds]

    rows = {k: [] for k in (
        "t", "true", "est", "cov", "cmd", "risk", "coll", "mindist", "force", "fb"
    )}
    ped_tracks = [] if collect_pedestrians else None
    pred_snaps = [] if collect_predictions_stride else None

    max_cycles = int(np.ceil(timeout / dt))
    status = "timeout"
    for cycle in range(max_cycles):
        tubes = []
        for i, ped in enumerate(peds):
            vel, _ = prediction.estimate_velocity(
                np.array(hist_t[i]), np.array(hist_p[i]), window=0.5, v_max=sfm.max_speed
            )
            track = prediction.PedestrianTrack(
                id=i, position=ped.position, velocity=vel, timestamp=cycle * dt
            )
            wps = np.roll(ped.waypoints, -ped.goal_idx, axis=0)
            tubes.append(prediction.predict_with_covs(track, wps, predictor_cfg, shared_covs))
        if pred_snaps is not None and cycle % collect_predictions_stride == 0:
            pred_snaps.append((cycle, np.array([tb.means for tb in tubes]) if tubes else np.zeros((0, 1, 2))))

        out = control_cycle(belief, tubes, goal, nominal, mppi_cfg, streams, cycle,
                            path_start=np.asarray(world.start[:2], dtype=float))
        nominal = out.nominal

        prev_true = true_state
        true_state = plant_step(true_state, out.command, dt, mppi_cfg)
        force = sfm_step(peds, prev_true.position, world, sfm, dt)

        # body-frame odometry increment of the true motion
        c, s = np.cos(prev_true.psi), np.sin(prev_true.psi)
        wdx, wdy = true_state.x - prev_true.x, true_state.y - prev_true.y
        inc = (c * wdx + s * wdy, -s * wdx + c * wdy, float(wrap_angle(true_state.psi - prev_true.psi)))
        belief = localizer_step(
            belief, inc, localizer_cfg, streams.localizer(cycle),
            true_pose=(true_state.x, true_state.y, true_state.psi),
        )

        for i, ped in enumerate(peds):
            hist_t[i].append((cycle + 1) * dt)
            hist_p[i].append(ped.position.copy())
            if len(hist_t[i]) > hist_len:
                hist_t[i].pop(0)
                hist_p[i].pop(0)

        mind = min_pedestrian_distance(true_state.position, peds)
        coll = mind < footprint.l_combined
        rows["t"].append((cycle + 1) * dt)
        rows["true"].append((true_state.x, true_state.y, true_state.psi))
        rows["est"].append((belief.mean.x, belief.mean.y, belief.mean.psi))
        rows["cov"].append((belief.cov[0, 0], belief.cov[0, 1], belief.cov[1, 1], belief.cov[2, 2]))
        rows["cmd"].append((out.command.v, out.command.omega))
        rows["risk"].append(out.executed_risk)
        rows["coll"].append(coll)
        rows["mindist"].append(mind)
        rows["force"].append(force)
        rows["fb"].append(out.all_rejected_fallback)
        if ped_tracks is not None:
            ped_tracks.append(np.array([p.position for p in peds]) if peds else np.zeros((0, 2)))

        pose = np.array([true_state.x, true_state.y, true_state.psi])
        if not np.all(np.isfinite(pose)) or not np.all(np.isfinite(belief.cov)):
            status = "diverged"
            break
        if not (-2.0 <= true_state.x <= world.length + 2.0 and -3.0 <= true_state.y <= world.width + 3.0):
            status = "diverged"
            break
        if np.hypot(*(true_state.position - goal)) <= world.goal_radius:
            status = "success"
            break

    return RunLog(
        status=status,
        t=np.array(rows["t"]),
        true_pose=np.array(rows["true"]),
        est_pose=np.array(rows["est"]),
        cov_entries=np.array(rows["cov"]),
        cmd=np.array(rows["cmd"]),
        executed_risk=np.array(rows["risk"]),
        collision=np.array(rows["coll"], dtype=bool),
        min_ped_dist=np.array(rows["mindist"]),
        robot_social_force=np.array(rows["force"]),
        fallback=np.array(rows["fb"], dtype=bool),
        seed=seed,
        config_echo=config_echo or {},
        start_pose=np.array(world.start, dtype=float),
        ped_positions=np.array(ped_tracks) if ped_tracks else None,
        predictions=pred_snaps,
    )
