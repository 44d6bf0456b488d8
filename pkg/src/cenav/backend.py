"""Kernel backend selection.

Geometry-heavy inner loops (raycasting, collision sweeps, arc scoring) ship in
two interchangeable implementations: numba-compiled loops and vectorized
numpy.  The active backend is chosen once at import time:

* ``CENAV_BACKEND=numpy`` forces the pure-numpy path.
* ``CENAV_BACKEND=numba`` requires numba and fails loudly if it is missing.
* unset: numba when importable, numpy otherwise.

Kernels avoid fastmath so both backends evaluate the same IEEE expressions.
"""

from __future__ import annotations

import os

_choice = os.environ.get("CENAV_BACKEND", "").strip().lower()

if _choice not in ("", "numba", "numpy"):
    raise RuntimeError(
        f"CENAV_BACKEND must be 'numba' or 'numpy', got {_choice!r}"
    )

if _choice == "numpy":
    NUMBA_AVAILABLE = False
else:
    try:
        from numba import njit  # noqa: F401

        NUMBA_AVAILABLE = True
    except ImportError:
        if _choice == "numba":
            raise RuntimeError("CENAV_BACKEND=numba but numba is not importable")
        NUMBA_AVAILABLE = False

USE_NUMBA = NUMBA_AVAILABLE

if USE_NUMBA:
    from numba import njit as jit_kernel
else:

    def jit_kernel(*args, **kwargs):
        """No-op stand-in for numba.njit when running on the numpy backend."""
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(fn):
            return fn

        return wrap


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
