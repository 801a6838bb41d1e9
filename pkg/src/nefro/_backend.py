"""Selects the compiled kernel module, falling back to pure Python.

Set ``NEFRO_PURE_PYTHON=1`` to force the fallback (used by the benchmark and
by the cross-backend tests).
"""

import os

from . import _kernels_py as python_kernels

try:
    from . import _kernels as compiled_kernels
except ImportError:  # extension not built
    compiled_kernels = None

if compiled_kernels is not None and os.environ.get("NEFRO_PURE_PYTHON", "") not in ("1", "true"):
    kernels = compiled_kernels
    NAME = "compiled"
else:
    kernels = python_kernels
    NAME = "python"
