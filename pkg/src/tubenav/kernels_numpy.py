"""Pure-numpy fallback for the hot kernels.

Same culling rules and windowing as kernels_numba; selected with
TUBENAV_NUMBA=0 or when numba is unavailable.
"""

import numpy as np
from scipy.special import erf

from .kernels_common import JOINT_SKIP, TAIL_SIGMAS, TWO_PI

_OMEGA_EPS = 1e-10


def _wrap(psi):
    w = np.mod(psi, TWO_PI)
    return np.where(w > np.pi, w - TWO_PI, w)


def rollout_batch(x0, y0, psi0, v, w, dt):
    K, T = v.shape
    traj = np.empty((K, T + 1, 3))
    traj[:, 0, 0] = x0
    traj[:, 0, 1] = y0
    traj[:, 0, 2] = psi0
    x = np.full(K, x0)
    y = np.full(K, y0)
    psi = np.full(K, psi0)
    for t in range(T):
        vt = v[:, t]
        wt = w[:, t]
        straight = np.abs(wt) < _OMEGA_EPS
        psi1 = psi + wt * dt
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(straight, 0.0, vt / np.where(straight, 1.0, wt))
        x = np.where(straight, x + vt * np.cos(psi) * dt, x + r * (np.sin(psi1) - np.sin(psi)))
        y = np.where(straight, y + vt * np.sin(psi) * dt, y - r * (np.cos(psi1) - np.cos(psi)))
        psi = np.where(straight & (wt == 0.0), psi, _wrap(psi1))
        traj[:, t + 1, 0] = x
        traj[:, t + 1, 1] = y
        traj[:, t + 1, 2] = psi
    return traj


def joint_occupancy(px, py, means, inv_aa, inv_bb, inv_ab, norms, bboxes, cell_area):
    n = px.shape[0]
    m = means.shape[0]
    if m == 0:
        return np.zeros(n)
    dx = px[:, None] - means[None, :, 0]
    dy = py[:, None] - means[None, :, 1]
    inside = (
        (px[:, None] >= bboxes[None, :, 0])
        & (px[:, None] <= bboxes[None, :, 1])
        & (py[:, None] >= bboxes[None, :, 2])
        & (py[:, None] <= bboxes[None, :, 3])
    )
    q = inv_aa[None, :] * dx * dx + 2.0 * inv_ab[None, :] * dx * dy + inv_bb[None, :] * dy * dy
    p = np.minimum(norms[None, :] * np.exp(-0.5 * q) * cell_area, 1.0)
    p = np.where(inside, p, 0.0)
    return 1.0 - np.prod(1.0 - p, axis=1)


def occ_weighted_risk(xi1, xi2, joint, c1, c2, lam1, lam2, half_side):
    K = c1.shape[0]
    out = np.empty(K)
    s1 = np.sqrt(2.0 * lam1) if lam1 > 0.0 else 0.0
    s2 = np.sqrt(2.0 * lam2) if lam2 > 0.0 else 0.0
    w1 = half_side + TAIL_SIGMAS * np.sqrt(max(lam1, 0.0))
    w2 = half_side + TAIL_SIGMAS * np.sqrt(max(lam2, 0.0))
    for k in range(K):
        lo = np.searchsorted(xi1, c1[k] - w1)
        hi = np.searchsorted(xi1, c1[k] + w1)
        d1 = xi1[lo:hi] - c1[k]
        d2 = xi2[lo:hi] - c2[k]
        jw = joint[lo:hi]
        keep = (jw > JOINT_SKIP) & (d2 >= -w2) & (d2 <= w2)
        d1 = d1[keep]
        d2 = d2[keep]
        jw = jw[keep]
        if s1 > 0.0:
            f1 = erf((d1 + half_side) / s1) - erf((d1 - half_side) / s1)
        else:
            f1 = np.where(np.abs(d1) <= half_side, 2.0, 0.0)
        if s2 > 0.0:
            f2 = erf((d2 + half_side) / s2) - erf((d2 - half_side) / s2)
        else:
            f2 = np.where(np.abs(d2) <= half_side, 2.0, 0.0)
        out[k] = min(max(float(np.sum(jw * 0.25 * f1 * f2)), 0.0), 1.0)
    return out


def warmup():
    """No compilation needed on the numpy path."""
