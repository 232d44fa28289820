"""Select the compiled path kernel when available, else the NumPy one.

Set ``VGFX_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _fallback

fallback_advance = _fallback.advance_paths
compiled_advance = None

if not os.environ.get("VGFX_PURE_PYTHON"):
    try:
        from ._kernels import advance_paths as compiled_advance
    except ImportError:  # extension not built
        compiled_advance = None

if compiled_advance is not None:
    BACKEND = "cython"
    advance_paths = compiled_advance
else:
    BACKEND = "numpy"
    advance_paths = fallback_advance
