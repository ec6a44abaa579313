"""Backend selection for the hot kernels.

The compiled extension is used when it imports cleanly; set
``NAVGAP_PURE_PYTHON=1`` to force the pure-Python fallback.
"""
import logging
import os

from . import _kernels_py

log = logging.getLogger(__name__)


def _load():
    if os.environ.get("NAVGAP_PURE_PYTHON", "") not in ("", "0"):
        return _kernels_py
    try:
        from . import _kernels
    except ImportError:
        log.debug("compiled kernels unavailable; using pure-Python fallback")
        return _kernels_py
    return _kernels


_impl = _load()

BACKEND = _impl.BACKEND
raycast = _impl.raycast
swept_collision = _impl.swept_collision
forward_edges = _impl.forward_edges
cost_to_go = _impl.cost_to_go


def available_backends():
    """Map backend name to kernel module for every backend that imports."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels
    except ImportError:
        pass
    else:
        out["cython"] = _kernels
    return out
