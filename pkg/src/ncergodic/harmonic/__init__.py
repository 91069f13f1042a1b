"""Harmonic analysis on finite metric measure spaces with operator values."""

from .dyadic import *  # noqa: F401,F403
from .martingale import *  # noqa: F401,F403
from .spaces import *  # noqa: F401,F403
from .squarefn import *  # noqa: F401,F403
from . import dyadic, martingale, spaces, squarefn

__all__ = dyadic.__all__ + martingale.__all__ + spaces.__all__ + squarefn.__all__
