"""Import-time selection of the compiled simplex kernels.

The Cython extension is preferred; the numpy fallback keeps the package
working from a plain source checkout. Set RAMPSVM_PURE=1 to force the
fallback (used by the benchmark for comparison runs).
"""

import os

if os.environ.get("RAMPSVM_PURE") == "1":
    from . import _kernels_py as _impl
else:
    try:
        from . import _speedups as _impl
    except ImportError:
        from . import _kernels_py as _impl

BACKEND = _impl.BACKEND
eliminate = _impl.eliminate
