"""Batch kernel backend selection.

The compiled extension is preferred when present; otherwise the NumPy
fallback is used.  Both produce identical samples for identical keys.
``COUPLEKIT_BACKEND=python`` or ``=native`` forces a choice (the latter
raises if the extension is not built).
"""

import os

from . import _purepy
from ._purepy import pick_vec, transport_vec  # shared helpers, always NumPy

_requested = os.environ.get("COUPLEKIT_BACKEND", "").strip().lower()

if _requested not in ("", "native", "python"):
    raise ValueError(f"COUPLEKIT_BACKEND must be 'native' or 'python', got {_requested!r}")

if _requested == "python":
    _impl = _purepy
    BACKEND = "python"
else:
    try:
        from . import _native as _impl

        BACKEND = "native"
    except ImportError:
        if _requested == "native":
            raise
        _impl = _purepy
        BACKEND = "python"

gumbel_single = _impl.gumbel_single
gumbel_pair = _impl.gumbel_pair
wmh_single = _impl.wmh_single
wmh_pair = _impl.wmh_pair
optimal_pair = _impl.optimal_pair
grid_session_pair = _impl.grid_session_pair
lowcomm_pair = _impl.lowcomm_pair


def backend_name() -> str:
    return BACKEND
