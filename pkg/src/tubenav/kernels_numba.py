"""Numba-jitted hot kernels (rollouts, joint occupancy, footprint risk).

Semantics mirror kernels_numpy exactly, including the windowing/culling
constants in kernels_common. Per-rollout sums run sequentially over the
sorted sample window, so results do not depend on the thread count.
"""

import math

import numba
import numpy as np

from .kernels_common import JOINT_SKIP, TAIL_SIGMAS, TWO_PI

numba.config.THREADING_LAYER = "workqueue"  # fork-safe, no TBB dependency

_OMEGA_EPS = 1e-10


@numba.njit(cache=True)
def rollout_batch(x0, y0, psi0, v, w, dt):
    """Propagate K control sequences from one start pose; returns (K, T+1, 3)."""
    K, T = v.shape
    traj = np.empty((K, T + 1, 3))
    for k in range(K):
        x = x0
        y = y0
        psi = psi0
        traj[k, 0, 0] = x
        traj[k, 0, 1] = y
        traj[k, 0, 2] = psi
        for t in range(T):
            vk = v[k, t]
            wk = w[k, t]
            if abs(wk) < _OMEGA_EPS:
                x += vk * math.cos(psi) * dt
                y += vk * math.sin(psi) * dt
                if wk != 0.0:
                    psi = psi + wk * dt
                    psi = psi % TWO_PI
                    if psi > math.pi:
                        psi -= TWO_PI
            else:
                r = vk / wk
                psi1 = psi + wk * dt
                x += r * (math.sin(psi1) - math.sin(psi))
                y -= r * (math.cos(psi1) - math.cos(psi))
                psi = psi1 % TWO_PI
                if psi > math.pi:
                    psi -= TWO_PI
            traj[k, t + 1, 0] = x
            traj[k, t + 1, 1] = y
            traj[k, t + 1, 2] = psi
    return traj


@numba.njit(cache=True)
def joint_occupancy(px, py, means, inv_aa, inv_bb, inv_ab, norms, bboxes, cell_area):
    """Per-sample probability that at least one obstacle occupies the cell.

    Each obstacle contributes min(1, pdf * cell_area); obstacles are skipped
    outside their precomputed bounding boxes where the contribution is
    below rounding level.
    """
    n = px.shape[0]
    m = means.shape[0]
    joint = np.zeros(n)
    for j in range(n):
        x = px[j]
        y = py[j]
        prod = 1.0
        for o in range(m):
            if x < bboxes[o, 0] or x > bboxes[o, 1] or y < bboxes[o, 2] or y > bboxes[o, 3]:
                continue
            dx = x - means[o, 0]
            dy = y - means[o, 1]
            q = inv_aa[o] * dx * dx + 2.0 * inv_ab[o] * dx * dy + inv_bb[o] * dy * dy
            p = norms[o] * math.exp(-0.5 * q) * cell_area
            if p > 1.0:
                p = 1.0
            prod *= 1.0 - p
        joint[j] = 1.0 - prod
    return joint


@numba.njit(cache=True, parallel=True)
def occ_weighted_risk(xi1, xi2, joint, c1, c2, lam1, lam2, half_side):
    """Sum of joint occupancy weighted by the analytic footprint coverage.

    Sample coordinates and rollout centers are expressed in the shared
    principal frame; xi1 must be ascending so each rollout reduces over a
    contiguous window. Truncation beyond TAIL_SIGMAS and the JOINT_SKIP
    threshold bound the neglected mass below ~1e-8.
    """
    K = c1.shape[0]
    out = np.empty(K)
    s1 = math.sqrt(2.0 * lam1) if lam1 > 0.0 else 0.0
    s2 = math.sqrt(2.0 * lam2) if lam2 > 0.0 else 0.0
    w1 = half_side + TAIL_SIGMAS * math.sqrt(max(lam1, 0.0))
    w2 = half_side + TAIL_SIGMAS * math.sqrt(max(lam2, 0.0))
    for k in numba.prange(K):
        lo = np.searchsorted(xi1, c1[k] - w1)
        hi = np.searchsorted(xi1, c1[k] + w1)
        acc = 0.0
        for j in range(lo, hi):
            if joint[j] <= JOINT_SKIP:
                continue
            d2 = xi2[j] - c2[k]
            if d2 < -w2 or d2 > w2:
                continue
            d1 = xi1[j] - c1[k]
            if s1 > 0.0:
                f1 = math.erf((d1 + half_side) / s1) - math.erf((d1 - half_side) / s1)
            else:
                f1 = 2.0 if abs(d1) <= half_side else 0.0
            if s2 > 0.0:
                f2 = math.erf((d2 + half_side) / s2) - math.erf((d2 - half_side) / s2)
            else:
                f2 = 2.0 if abs(d2) <= half_side else 0.0
            acc += joint[j] * 0.25 * f1 * f2
        out[k] = min(max(acc, 0.0), 1.0)
    return out


def warmup():
    """Trigger JIT compilation of all kernels on tiny inputs."""
    rollout_batch(0.0, 0.0, 0.0, np.zeros((1, 1)), np.zeros((1, 1)), 0.05)
    joint_occupancy(
        np.zeros(1), np.zeros(1), np.zeros((1, 2)),
        np.ones(1), np.ones(1), np.zeros(1), np.ones(1),
        np.array([[-1.0, 1.0, -1.0, 1.0]]), 0.1,
    )
    occ_weighted_risk(
        np.zeros(1), np.zeros(1), np.full(1, 0.5),
        np.zeros(1), np.zeros(1), 0.01, 0.01, 0.4,
    )
