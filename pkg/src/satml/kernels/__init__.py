"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

Backend selection: numba is used when importable unless the environment
variable SATML_NUMBA is set to "0".  Both backends implement the same
sequential accumulation order, so results agree.
"""

import os

BACKEND = "numpy"

if os.environ.get("SATML_NUMBA", "1") != "0":
    try:
        from ._numba import NO_SPLIT, best_split_feature, solve_kepler  # noqa: F401

        BACKEND = "numba"
    except ImportError:
        pass

if BACKEND == "numpy":
    from ._numpy import NO_SPLIT, best_split_feature, solve_kepler  # noqa: F401

__all__ = ["BACKEND", "NO_SPLIT", "best_split_feature", "solve_kepler"]
