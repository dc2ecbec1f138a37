"""Robot motion model and one-tube unscented covariance propagation.

The robot is a planar differential drive with state (x, y, psi) and
controls (v, omega). A single step integrates the twist exactly over dt
(circular arc for omega != 0, straight line otherwise), so repeated
fine substeps and one coarse step agree for constant controls.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConsistencyError, InvalidStateError

TWO_PI = 2.0 * np.pi

# |omega*dt| below this uses the straight-line limit of the arc formulas
_OMEGA_EPS = 1e-10


def wrap_angle(a):
    """Wrap an angle (scalar or array) to (-pi, pi]."""
    w = np.mod(a, TWO_PI)
    return np.where(w > np.pi, w - TWO_PI, w) if np.ndim(a) else (w - TWO_PI if w > np.pi else w)


@dataclass(frozen=True)
class RobotState:
    x: float
    y: float
    psi: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.psi], dtype=float)

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)


@dataclass(frozen=True)
class Control:
    v: float
    omega: float

    def as_array(self) -> np.ndarray:
        return np.array([self.v, self.omega], dtype=float)


@dataclass(frozen=True)
class UtParams:
    """Scaled sigma-point spread parameters (alpha in (0, 1])."""

    alpha: float = 1.0
    beta: float = 2.0
    kappa: float = 0.0

    def weights(self, n: int):
        lam = self.alpha**2 * (n + self.kappa) - n
        c = 0.5 / (n + lam)
        wm = np.full(2 * n + 1, c)
        wc = np.full(2 * n + 1, c)
        wm[0] = lam / (n + lam)
        wc[0] = lam / (n + lam) + (1.0 - self.alpha**2 + self.beta)
        return wm, wc


@dataclass
class StateBelief:
    """Gaussian pose belief: mean state and 3x3 covariance."""

    mean: RobotState
    cov: np.ndarray

    def __post_init__(self):
        self.cov = np.asarray(self.cov, dtype=float)
        validate_covariance(self.cov, size=3)


@dataclass
class CovarianceTube:
    """Per-step 3x3 covariance sequence shared by all rollouts of one cycle."""

    covs: np.ndarray  # (T+1, 3, 3)

    def positional(self) -> np.ndarray:
        """All T+1 positional 2x2 blocks, symmetrized."""
        blocks = self.covs[:, :2, :2]
        return 0.5 * (blocks + np.transpose(blocks, (0, 2, 1)))


def validate_covariance(cov: np.ndarray, size: int, tol: float = 1e-9) -> None:
    if cov.shape != (size, size):
        raise ConsistencyError(f"covariance must be {size}x{size}, got {cov.shape}")
    if not np.all(np.isfinite(cov)):
        raise ConsistencyError("covariance has non-finite entries")
    if np.max(np.abs(cov - cov.T)) > tol:
        raise ConsistencyError("covariance not symmetric within tolerance")
    w = np.linalg.eigvalsh(0.5 * (cov + cov.T))
    if w.min() < -1e-12:
        raise ConsistencyError(f"covariance not PSD: min eigenvalue {w.min():.3e}")


def step(state: RobotState, control: Control, dt: float) -> RobotState:
    """Advance one state by one control over dt (exact constant-twist arc)."""
    vals = (state.x, state.y, state.psi, control.v, control.omega)
    if not all(np.isfinite(v) for v in vals):
        raise InvalidStateError(f"non-finite state/control: {vals}")
    if dt <= 0:
        raise InvalidStateError(f"dt must be positive, got {dt}")
    x, y, psi = _step_arrays(
        np.array([state.x]), np.array([state.y]), np.array([state.psi]),
        control.v, control.omega, dt,
    )
    return RobotState(float(x[0]), float(y[0]), float(psi[0]))


def _step_arrays(x, y, psi, v, omega, dt):
    """Vectorized twist step on parallel state arrays under one control."""
    if abs(omega) < _OMEGA_EPS:
        nx = x + v * np.cos(psi) * dt
        ny = y + v * np.sin(psi) * dt
        npsi = psi if omega == 0.0 else wrap_angle(psi + omega * dt)
        return nx, ny, np.asarray(npsi)
    r = v / omega
    psi1 = psi + omega * dt
    nx = x + r * (np.sin(psi1) - np.sin(psi))
    ny = y - r * (np.cos(psi1) - np.cos(psi))
    return nx, ny, wrap_angle(psi1)


def rollout_mean(start: RobotState, controls, dt: float):
    """Propagate the mean trajectory; returns a list of T+1 RobotState."""
    if len(controls) == 0:
        raise InvalidStateError("controls must be non-empty")
    states = [start]
    for u in controls:
        states.append(step(states[-1], u, dt))
    return states


def ut_propagate_tube(
    belief: StateBelief, controls, dt: float, params: UtParams = UtParams()
) -> CovarianceTube:
    """Propagate the belief covariance once along the nominal control sequence.

    Seven sigma points are drawn from the belief and pushed through the
    dynamics for the whole horizon; the covariance is recombined at every
    step with wrapped heading residuals. No process noise is added, so a
    zero input covariance yields an exactly zero tube.
    """
    if len(controls) == 0:
        raise InvalidStateError("controls must be non-empty")
    n = 3
    wm, wc = params.weights(n)
    lam = params.alpha**2 * (n + params.kappa) - n

    cov = 0.5 * (belief.cov + belief.cov.T)
    evals, evecs = np.linalg.eigh(cov)
    if evals.min() < -1e-12:
        raise ConsistencyError(f"belief covariance not PSD: {evals.min():.3e}")
    sqrt_cov = evecs @ np.diag(np.sqrt(np.maximum(evals, 0.0) * (n + lam))) @ evecs.T

    mu = belief.mean.as_array()
    # columns of sqrt_cov give the +/- spread directions
    pts = np.empty((2 * n + 1, 3))
    pts[0] = mu
    for i in range(n):
        pts[1 + i] = mu + sqrt_cov[:, i]
        pts[1 + n + i] = mu - sqrt_cov[:, i]
    pts[:, 2] = wrap_angle(pts[:, 2])

    T = len(controls)
    covs = np.empty((T + 1, 3, 3))
    covs[0] = cov
    xs, ys, psis = pts[:, 0].copy(), pts[:, 1].copy(), pts[:, 2].copy()
    for t, u in enumerate(controls):
        v, omega = (u.v, u.omega) if isinstance(u, Control) else (float(u[0]), float(u[1]))
        xs, ys, psis = _step_arrays(xs, ys, psis, v, omega, dt)
        covs[t + 1] = _recombine(xs, ys, psis, wm, wc)
    return CovarianceTube(covs=covs)


def _recombine(xs, ys, psis, wm, wc):
    """Weighted covariance of sigma points with circular heading statistics."""
    mx = float(wm @ xs)
    my = float(wm @ ys)
    mpsi = np.arctan2(wm @ np.sin(psis), wm @ np.cos(psis))
    d = np.empty((xs.shape[0], 3))
    d[:, 0] = xs - mx
    d[:, 1] = ys - my
    d[:, 2] = wrap_angle(psis - mpsi)
    cov = (d * wc[:, None]).T @ d
    return 0.5 * (cov + cov.T)


def positional_block(cov3: np.ndarray) -> np.ndarray:
    """Top-left 2x2 block of a 3x3 covariance, symmetrized."""
    b = np.asarray(cov3, dtype=float)[:2, :2]
    return 0.5 * (b + b.T)
