"""Select the kernel implementation at import time.

The compiled Cython core is preferred. Set ``FRAUDTRAP_PURE=1`` to force the
pure-Python kernels (useful for debugging and for the backend benchmark).
"""
import logging
import os

log = logging.getLogger(__name__)

if os.environ.get("FRAUDTRAP_PURE", "") not in ("", "0"):
    from fraudtrap import _pykernels as kernels
    BACKEND = "python"
else:
    try:
        from fraudtrap import _kernels as kernels
        BACKEND = "compiled"
    except ImportError:  # pragma: no cover - depends on build environment
        log.info("compiled kernels unavailable, using pure-Python fallback")
        from fraudtrap import _pykernels as kernels
        BACKEND = "python"

__all__ = ["BACKEND", "kernels"]
