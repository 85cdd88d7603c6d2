"""Numba acceleration shim.

Hot kernels are written as plain numpy functions and jitted when numba is
available.  Setting PATCHGRAPH_NUMBA=0 (or numba failing to import) selects
the pure numpy/Python fallback path; both paths run the same source, so
results are identical.  ``bench/bench_kernels.py`` compares the two modes.
"""

import os


def _resolve_numba():
    flag = os.environ.get("PATCHGRAPH_NUMBA", "1").strip().lower()
    if flag in ("0", "false", "no", "off"):
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


NUMBA_ENABLED = _resolve_numba()

if NUMBA_ENABLED:
    from numba import njit
else:

    def njit(*args, **kwargs):
        # Mirror numba's decorator signature: bare or parametrized.
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap
