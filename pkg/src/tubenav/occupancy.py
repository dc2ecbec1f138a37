"""Probability that a point is covered by the uncertainty-inflated footprint.

The footprint is a square with side robot+person diameter, axis-aligned in
the principal frame of the positional covariance. Marginalizing the square
indicator over a Gaussian position belief factorizes into a product of
error-function terms per principal axis; a zero eigenvalue degenerates that
axis to the exact indicator limit.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .errors import ConsistencyError

# eigenvalues in [-EIG_FLOOR_TOL, 0) are rounding residue and floor to 0
EIG_FLOOR_TOL = 1e-9


@dataclass
class PositionBelief:
    """Gaussian 2D position belief."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float).reshape(2)
        self.cov = np.asarray(self.cov, dtype=float).reshape(2, 2)
        if np.max(np.abs(self.cov - self.cov.T)) > 1e-9:
            raise ConsistencyError("position covariance not symmetric within 1e-9")


@dataclass(frozen=True)
class FootprintSpec:
    """Combined square footprint derived from robot and person radii."""

    l_robot: float = 0.3
    l_person: float = 0.5
    circumscribe: bool = False  # side = 2*l_combined instead of l_combined

    def __post_init__(self):
        if self.l_robot <= 0 or self.l_person <= 0:
            raise ConsistencyError("footprint radii must be strictly positive")

    @property
    def l_combined(self) -> float:
        return self.l_robot + self.l_person

    @property
    def side(self) -> float:
        return 2.0 * self.l_combined if self.circumscribe else self.l_combined

    @property
    def half_side(self) -> float:
        return 0.5 * self.side


@dataclass(frozen=True)
class PrincipalFrame:
    """Eigendecomposition of a 2x2 covariance: lambda1 >= lambda2 >= 0."""

    lambda1: float
    lambda2: float
    rotation: np.ndarray  # columns are eigenvectors, det = +1


def _floor_eigenvalue(lam: float) -> float:
    if lam < -EIG_FLOOR_TOL:
        raise ConsistencyError(f"negative eigenvalue {lam:.3e} below tolerance")
    return max(lam, 0.0)


def eig2(cov: np.ndarray) -> PrincipalFrame:
    """Closed-form symmetric 2x2 eigendecomposition with a fixed sign convention.

    The leading eigenvector has its first nonzero component positive; the
    second column completes a right-handed frame. Repeated eigenvalues
    return the identity rotation.
    """
    cov = np.asarray(cov, dtype=float)
    if np.max(np.abs(cov - cov.T)) > 1e-9:
        raise ConsistencyError("matrix not symmetric within 1e-9")
    a, b, c = cov[0, 0], cov[1, 1], 0.5 * (cov[0, 1] + cov[1, 0])
    half_tr = 0.5 * (a + b)
    disc = np.hypot(0.5 * (a - b), c)
    lam1 = _floor_eigenvalue(half_tr + disc)
    lam2 = _floor_eigenvalue(half_tr - disc)

    scale = max(abs(a), abs(b), abs(c), 1.0)
    if disc <= 1e-15 * scale:
        return PrincipalFrame(lam1, lam2, np.eye(2))
    # eigenvector of lam1: prefer the better-conditioned of the two forms
    v = np.array([lam1 - b, c]) if abs(lam1 - b) >= abs(lam1 - a) else np.array([c, lam1 - a])
    if np.hypot(v[0], v[1]) == 0.0:
        return PrincipalFrame(lam1, lam2, np.eye(2))
    v = v / np.hypot(v[0], v[1])
    if (v[0] < 0.0) or (v[0] == 0.0 and v[1] < 0.0):
        v = -v
    rot = np.array([[v[0], -v[1]], [v[1], v[0]]])
    return PrincipalFrame(lam1, lam2, rot)


def occ_prob(query, belief: PositionBelief, half_side: float):
    """Coverage probability of query point(s) under the belief footprint.

    query may be a single 2-vector or an (N, 2) array; returns a float or
    an (N,) array accordingly.
    """
    if half_side <= 0:
        raise ConsistencyError("half_side must be positive")
    q = np.asarray(query, dtype=float)
    single = q.ndim == 1
    q = np.atleast_2d(q)
    frame = eig2(belief.cov)
    xi = (q - belief.mean) @ frame.rotation  # R^T (q - mean), row-wise
    p = 0.25 * _axis_factor(xi[:, 0], frame.lambda1, half_side) * _axis_factor(
        xi[:, 1], frame.lambda2, half_side
    )
    p = np.clip(p, 0.0, 1.0)
    return float(p[0]) if single else p


def _axis_factor(xi, lam, half_side):
    if lam > 0.0:
        s = np.sqrt(2.0 * lam)
        return erf((xi + half_side) / s) - erf((xi - half_side) / s)
    return np.where(np.abs(xi) <= half_side, 2.0, 0.0)


def occ_mass(belief: PositionBelief, half_side: float, nodes_per_axis: int = 240) -> float:
    """Quadrature of occ_prob over the supporting box (verification only).

    Tensor Gauss-Legendre over mean +/- (half_side + 8*sigma_max); the exact
    value is the squared footprint side, independent of covariance.
    """
    frame = eig2(belief.cov)
    sigma_max = np.sqrt(max(frame.lambda1, frame.lambda2, 0.0))
    half_box = half_side + 8.0 * sigma_max
    nodes, weights = np.polynomial.legendre.leggauss(nodes_per_axis)
    x = belief.mean[0] + half_box * nodes
    y = belief.mean[1] + half_box * nodes
    gx, gy = np.meshgrid(x, y, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    vals = occ_prob(pts, belief, half_side).reshape(nodes_per_axis, nodes_per_axis)
    w2 = np.outer(weights, weights) * half_box * half_box
    return float(np.sum(vals * w2))
