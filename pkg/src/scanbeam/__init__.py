"""Recoverability analysis for focused-beam scattering scans.

The package decides which Fourier coefficients of a scattering potential a
reduced scan determines uniquely, and demonstrates the answer constructively:
simulated measurements, reconstruction on the recoverable region, and
explicit non-uniqueness witnesses on the rest.
"""

from .errors import ScanBeamError
from .geometry import ScanConfig

__all__ = ["ScanBeamError", "ScanConfig", "__version__"]

__version__ = "0.1.0"
