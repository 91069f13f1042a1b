"""Numerical toolkit for noncommutative ergodic averages, dilations and square functions."""

__version__ = "0.1.0"

from . import dilation, ergodic, harmonic, lamperti, opalg  # noqa: E402

__all__ = ["opalg", "lamperti", "dilation", "ergodic", "harmonic", "__version__"]
