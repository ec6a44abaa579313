"""Desk-scale lab for invariant representations in sim-to-real visual navigation."""
from .kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"
__all__ = ["KERNEL_BACKEND", "__version__"]
