"""Random Schrodinger waves in time-dependent Gaussian media: homogenization, kinetic limits, Wigner pairings."""

__version__ = "0.1.0"

from .spectral import SpectralModel, validate  # noqa: E402
from .effective import d_total, d_zero  # noqa: E402

__all__ = ["SpectralModel", "validate", "d_total", "d_zero", "__version__"]
