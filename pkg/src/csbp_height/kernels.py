"""Backend selection for the hot loops.

The compiled extension is used when it was built; otherwise (or when
``CSBP_HEIGHT_PURE=1``) the pure-Python twins are used.  ``BACKEND`` names
the active one.
"""

import os

from . import _kernels_py

if os.environ.get("CSBP_HEIGHT_PURE", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels_c as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = "cython" if _impl is not _kernels_py else "python"

height_scan = _impl.height_scan
gw_advance = _impl.gw_advance
GW_NEED_RANDOMS = _kernels_py.GW_NEED_RANDOMS
GW_FINISHED = _kernels_py.GW_FINISHED
GW_ABSORBED = _kernels_py.GW_ABSORBED
GW_OVERFLOW = _kernels_py.GW_OVERFLOW
GW_BUFFER_FULL = _kernels_py.GW_BUFFER_FULL


def backends():
    """All importable backends as ``{name: module}`` (for equivalence tests and benchmarks)."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels_c

        out["cython"] = _kernels_c
    except ImportError:
        pass
    return out
