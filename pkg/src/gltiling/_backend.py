"""Select the compiled kernels when available, else the pure-Python ones.

Set ``GLTILING_PURE=1`` to force the fallback.
"""
import os

if os.environ.get("GLTILING_PURE", "") not in ("", "0"):
    from . import _kernels_py as kernels
    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels
        BACKEND = "cython"
    except ImportError:
        from . import _kernels_py as kernels
        BACKEND = "python"

__all__ = ["kernels", "BACKEND"]
