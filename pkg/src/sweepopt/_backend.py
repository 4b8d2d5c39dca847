"""Select the kernel implementation at import time.

The compiled ``_core`` extension is preferred. Setting ``SWEEPOPT_PURE_PYTHON=1``
or running without a built extension falls back to ``_pycore``.
"""
import os

from . import _pycore

pure = _pycore
compiled = None

if not os.environ.get("SWEEPOPT_PURE_PYTHON"):
    try:
        from . import _core as compiled
    except ImportError:
        compiled = None

kernels = compiled if compiled is not None else pure
COMPILED = kernels is not pure
