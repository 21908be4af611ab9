"""Kernel backend selection: compiled extension if importable, else numpy.

Set PSYCHFM_NO_EXT=1 to force the pure-Python kernels (useful for the
cross-backend tests and the benchmark).
"""

import os

from . import _fm_py

if os.environ.get("PSYCHFM_NO_EXT"):
    kernels = _fm_py
else:
    try:
        from . import _fm_cy as kernels  # type: ignore[no-redef]
    except ImportError:
        kernels = _fm_py


def backend_name() -> str:
    return kernels.BACKEND_NAME
