"""Simulation and reconstruction for pulsed correlation time-of-flight imaging."""
__version__ = "0.1.0"

from .errors import PCToFError  # noqa: E402
from .signal_model import CodingConfig, pulsed_coding, sinusoid_coding  # noqa: E402

__all__ = ["__version__", "PCToFError", "CodingConfig", "pulsed_coding", "sinusoid_coding"]
