"""Kernel backend selection.

The compiled extension is used when it was built; set ``WMRECON_PURE_PYTHON=1``
to force the pure-Python twin.  Both produce identical results.
"""

import os

from wmrecon._kernels_py import (  # noqa: F401
    CALL_STACK_REPLACE,
    EXEC_CRAFTED,
    MEMALLOC,
    MEMFREE,
)

BACKEND = "python"

if not os.environ.get("WMRECON_PURE_PYTHON"):
    try:
        from wmrecon._kernels import FreeList, scan_transitions
        BACKEND = "cython"
    except ImportError:
        pass

if BACKEND == "python":
    from wmrecon._kernels_py import FreeList, scan_transitions  # noqa: F811


def available_backends():
    """Map backend name to its kernel module, for tests and benchmarks."""
    from wmrecon import _kernels_py
    found = {"python": _kernels_py}
    try:
        from wmrecon import _kernels
        found["cython"] = _kernels
    except ImportError:
        pass
    return found
