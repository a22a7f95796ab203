"""Kernel backend selection.

The compiled extension is optional; a pure numpy/Python implementation is
used when it is missing or when VTFORGE_PURE=1 is set. Both backends are
kept arithmetically identical.
"""

import os

from vtforge._kernels import _pykernels

if os.environ.get("VTFORGE_PURE", "") not in ("", "0"):
    _impl = _pykernels
    BACKEND = "pure"
else:
    try:
        from vtforge._kernels import _ckernels as _impl
        BACKEND = "compiled"
    except ImportError:
        _impl = _pykernels
        BACKEND = "pure"

lsap = _impl.lsap
bilinear_sample = _impl.bilinear_sample
convex_clip_area = _impl.convex_clip_area

__all__ = ["BACKEND", "lsap", "bilinear_sample", "convex_clip_area"]
