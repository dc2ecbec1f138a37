"""Kernel backend selection.

Hot numeric loops have two implementations: numba-jitted kernels and a
vectorized pure-numpy fallback. The numpy path is selected by setting the
environment variable ``TUBENAV_NUMBA=0`` (or ``false``/``off``) before
import, or automatically when numba is not importable. Both paths share
one windowing/culling rule so they agree to rounding error; each path is
bitwise deterministic on its own.
"""

import os

_FLAG = os.environ.get("TUBENAV_NUMBA", "1").strip().lower()
NUMBA_REQUESTED = _FLAG not in ("0", "false", "off", "no")

if NUMBA_REQUESTED:
    try:
        import numba  # noqa: F401

        NUMBA_AVAILABLE = True
    except ImportError:  # pragma: no cover - exercised only without numba
        NUMBA_AVAILABLE = False
else:
    NUMBA_AVAILABLE = False

USE_NUMBA = NUMBA_REQUESTED and NUMBA_AVAILABLE


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
