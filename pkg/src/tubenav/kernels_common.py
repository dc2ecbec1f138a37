"""Constants shared by the numba and numpy kernel implementations."""

import math

TWO_PI = 2.0 * math.pi

# occupancy window half-width beyond the footprint, in principal-axis sigmas;
# the largest neglected per-sample term is ~4e-12, so the truncated sum stays
# within ~1e-8 of the full sum for any realistic sample count
TAIL_SIGMAS = 7.0

# samples whose joint obstacle occupancy is at or below this contribute less
# than JOINT_SKIP per sample and are skipped
JOINT_SKIP = 1e-12
