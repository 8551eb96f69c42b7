"""Backend selection for the hot numeric kernels.

The environment variable ``FDEXPLAIN_BACKEND`` picks the implementation:

* ``auto`` (default) -- use numba if it imports, otherwise pure numpy
* ``numba``          -- require numba, fail loudly if missing
* ``numpy``          -- force the pure-numpy fallback

The choice is fixed at import time. Results are deterministic within a
backend; the two backends agree to floating-point roundoff but are not
guaranteed bit-identical (different reduction orders), so byte-stability
contracts hold per backend.
"""

import os
import warnings

_CHOICE = os.environ.get("FDEXPLAIN_BACKEND", "auto").strip().lower()
if _CHOICE not in ("auto", "numba", "numpy"):
    raise ValueError(
        f"FDEXPLAIN_BACKEND must be 'auto', 'numba', or 'numpy', got {_CHOICE!r}"
    )

NUMBA_ENABLED = False
if _CHOICE in ("auto", "numba"):
    try:
        from numba import njit, prange  # noqa: F401
        NUMBA_ENABLED = True
    except ImportError:
        if _CHOICE == "numba":
            raise
        warnings.warn("numba not importable; falling back to pure-numpy kernels")

if not NUMBA_ENABLED:
    def njit(*args, **kwargs):  # noqa: D103 - identity stand-in for numba.njit
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap

    prange = range

BACKEND = "numba" if NUMBA_ENABLED else "numpy"
