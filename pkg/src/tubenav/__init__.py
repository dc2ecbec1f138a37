"""tubenav: corridor social-navigation simulator with risk-constrained
sampling controllers and a calibration audit harness."""

__version__ = "0.1.0"

from .backend import backend_name

__all__ = ["backend_name", "__version__"]
