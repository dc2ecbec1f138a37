"""Backend dispatch for the hot kernels (see backend module)."""

from .backend import USE_NUMBA, backend_name

if USE_NUMBA:
    from .kernels_numba import joint_occupancy, occ_weighted_risk, rollout_batch, warmup
else:
    from .kernels_numpy import joint_occupancy, occ_weighted_risk, rollout_batch, warmup

__all__ = [
    "backend_name",
    "joint_occupancy",
    "occ_weighted_risk",
    "rollout_batch",
    "warmup",
]
