"""Hot-path kernels with a compiled core and a pure NumPy fallback.

The compiled module (`stlnav.kernels._core`, built from `_core.pyx`) is
preferred when it imported cleanly; otherwise the NumPy implementations in
`_fallback` are used. Both produce identical results. Set the environment
variable ``STLNAV_PURE_KERNELS=1`` to force the fallback (useful for
debugging and for the backend-parity tests).
"""

from __future__ import annotations

import os

from . import _fallback

if os.environ.get("STLNAV_PURE_KERNELS"):
    _impl = _fallback
    BACKEND = "pure"
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        _impl = _fallback
        BACKEND = "pure"

CAP = _fallback.CAP

window_min = _impl.window_min
window_max = _impl.window_max
until_robustness = _impl.until_robustness
segment_cost = _impl.segment_cost

__all__ = [
    "BACKEND",
    "CAP",
    "window_min",
    "window_max",
    "until_robustness",
    "segment_cost",
]
