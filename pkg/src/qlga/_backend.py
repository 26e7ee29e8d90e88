"""Kernel selection: compiled extension when importable, numpy fallback otherwise.

Set ``QLGA_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

if os.environ.get("QLGA_PURE_PYTHON", "") not in ("", "0"):
    kernels = _kernels_py
else:
    try:
        from . import _kernels as kernels
    except ImportError:
        kernels = _kernels_py

BACKEND = kernels.NAME


def set_num_threads(n: int) -> None:
    kernels.set_num_threads(int(n))
