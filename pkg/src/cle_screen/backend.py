"""Kernel backend selection.

The compiled extension (`cle_screen._kernels`, Cython + OpenMP) is preferred
when it was built; otherwise the pure-NumPy implementation is used. Setting
CLE_SCREEN_BACKEND=numpy or =cython forces the choice, the latter raising if
the extension is unavailable.

`benchmarks/bench_kernels.py` compares the two.
"""

import os

from . import _kernels_np

_FORCED = os.environ.get("CLE_SCREEN_BACKEND", "").strip().lower()

if _FORCED == "numpy":
    kernels = _kernels_np
else:
    try:
        from . import _kernels as kernels  # type: ignore[no-redef]
    except ImportError:
        if _FORCED == "cython":
            raise ImportError(
                "CLE_SCREEN_BACKEND=cython but the compiled extension is not "
                "built; run `pip install -e . --no-build-isolation`"
            )
        kernels = _kernels_np


def backend_name():
    return "cython" if kernels.IS_COMPILED else "numpy"


def set_num_threads(n):
    """Limit kernel threading (used by the multi-process fold runner)."""
    kernels.set_num_threads(int(n))
