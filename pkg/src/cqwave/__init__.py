"""Convolution quadrature for exterior wave scattering, with pole-based rate prediction."""

__version__ = "0.1.0"

from .estimator import CQWaveSolver  # noqa: E402

__all__ = ["CQWaveSolver", "__version__"]
