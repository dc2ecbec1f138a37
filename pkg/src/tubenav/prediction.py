"""Goal-directed pedestrian prediction with configurable (mis)calibration.

Mean propagation walks toward the waypoint sequence at the observed speed
and is fully decoupled from uncertainty propagation, which follows a
4-state constant-velocity model scaled per step by an inflation factor.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ConsistencyError


@dataclass
class PedestrianTrack:
    """One tracked pedestrian observation."""

    id: int
    position: np.ndarray
    velocity: np.ndarray
    timestamp: float = 0.0

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(2)
        self.velocity = np.asarray(self.velocity, dtype=float).reshape(2)
        if not (np.all(np.isfinite(self.position)) and np.all(np.isfinite(self.velocity))):
            raise ConsistencyError("track fields must be finite")


@dataclass
class GaussianTube:
    """Predicted mean path and per-step positional covariances."""

    means: np.ndarray  # (T+1, 2)
    covs: np.ndarray  # (T+1, 2, 2)


@dataclass
class PredictorConfig:
    sigma_init: float = 0.01  # diagonal initial variance over the 4-state
    kappa_pred: float = 1.0  # multiplicative covariance inflation
    q_accel: float = 0.3  # white-acceleration intensity (m^2/s^3)
    r_goal: float = 0.3
    horizon_steps: int = 40
    dt: float = 0.05
    inflation_mode: str = "per_step"  # or "single": one-shot scaling

    def __post_init__(self):
        if self.sigma_init <= 0 or self.kappa_pred <= 0 or self.r_goal <= 0:
            raise ConfigError("sigma_init, kappa_pred, r_goal must be positive")
        if self.horizon_steps < 1:
            raise ConfigError("horizon_steps must be >= 1")
        if self.inflation_mode not in ("per_step", "single"):
            raise ConfigError(f"unknown inflation_mode {self.inflation_mode!r}")


def cv_matrices(dt: float, q_accel: float):
    """Constant-velocity transition and white-acceleration process noise."""
    f = np.eye(4)
    f[0, 2] = dt
    f[1, 3] = dt
    q = q_accel * np.array(
        [
            [dt**4 / 4, 0.0, dt**3 / 2, 0.0],
            [0.0, dt**4 / 4, 0.0, dt**3 / 2],
            [dt**3 / 2, 0.0, dt**2, 0.0],
            [0.0, dt**3 / 2, 0.0, dt**2],
        ]
    )
    return f, q


def mean_path(track: PedestrianTrack, goals, config: PredictorConfig) -> np.ndarray:
    """Goal-directed constant-speed mean propagation over the horizon."""
    goals = np.atleast_2d(np.asarray(goals, dtype=float))
    if goals.size == 0:
        raise ConfigError("at least one goal waypoint required")
    T = config.horizon_steps
    dt = config.dt
    speed = float(np.hypot(track.velocity[0], track.velocity[1]))

    means = np.empty((T + 1, 2))
    means[0] = track.position
    p = track.position.copy()
    gi = 0
    n_goals = goals.shape[0]
    # switch initially if already inside the goal radius
    for _ in range(n_goals):
        if np.hypot(*(p - goals[gi % n_goals])) < config.r_goal:
            gi += 1
        else:
            break
    for t in range(1, T + 1):
        if speed > 0.0:
            g = goals[gi % n_goals]
            d = g - p
            dist = np.hypot(d[0], d[1])
            step_len = speed * dt
            if dist <= step_len:
                p = g.copy()  # land on the waypoint, no overshoot
            elif dist > 0.0:
                p = p + (step_len / dist) * d
            if np.hypot(*(p - goals[gi % n_goals])) < config.r_goal:
                gi += 1
        means[t] = p
    return means


def covariance_path(config: PredictorConfig) -> np.ndarray:
    """Positional covariance sequence of the inflated CV recursion.

    Track-independent: the same path is shared by every pedestrian under
    one predictor configuration.
    """
    f, q = cv_matrices(config.dt, config.q_accel)
    sigma = config.sigma_init * np.eye(4)
    covs = np.empty((config.horizon_steps + 1, 2, 2))
    covs[0] = sigma[:2, :2]
    kappa_step = config.kappa_pred if config.inflation_mode == "per_step" else 1.0
    for t in range(1, config.horizon_steps + 1):
        sigma = kappa_step * (f @ sigma @ f.T + q)
        covs[t] = 0.5 * (sigma[:2, :2] + sigma[:2, :2].T)
    if config.inflation_mode == "single":
        covs = config.kappa_pred * covs
    return covs


def predict(track: PedestrianTrack, goals, config: PredictorConfig) -> GaussianTube:
    """Predict a Gaussian tube over the horizon for one pedestrian.

    goals is the ordered upcoming waypoint list (treated as cyclic); the
    mean advances at the observed speed and switches waypoints inside
    r_goal. Covariance follows Sigma' = kappa * (F Sigma F^T + Q).
    """
    return GaussianTube(means=mean_path(track, goals, config), covs=covariance_path(config))


def predict_with_covs(
    track: PedestrianTrack, goals, config: PredictorConfig, covs: np.ndarray
) -> GaussianTube:
    """predict() with a precomputed shared covariance path."""
    return GaussianTube(means=mean_path(track, goals, config), covs=covs)


def estimate_velocity(times, positions, window: float = 0.5, v_max: float = 1.5):
    """Least-squares velocity over a trailing time window.

    Returns (velocity, ok); ok is False when fewer than two samples span a
    positive interval, in which case the velocity is zero.
    """
    times = np.asarray(times, dtype=float)
    positions = np.asarray(positions, dtype=float).reshape(-1, 2)
    if times.shape[0] != positions.shape[0]:
        raise ConsistencyError("times and positions length mismatch")
    if times.shape[0] < 2:
        return np.zeros(2), False
    keep = times >= times[-1] - window
    t = times[keep]
    p = positions[keep]
    span = t[-1] - t[0]
    if t.shape[0] < 2 or span <= 0.0:
        return np.zeros(2), False
    tc = t - t.mean()
    denom = float(tc @ tc)
    vel = (tc @ (p - p.mean(axis=0))) / denom
    speed = np.hypot(vel[0], vel[1])
    if speed > v_max:
        vel = vel * (v_max / speed)
    return vel, True
