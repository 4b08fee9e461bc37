"""Batch filtering kernels with a compiled core and a pure-Python fallback.

The compiled extension (built from ``_speedups.pyx``) is preferred when it
imported successfully; otherwise the NumPy implementation in ``fallback.py``
takes over with identical contracts.  Set ``PLG_PURE_PYTHON=1`` in the
environment to force the fallback, e.g. to compare backends.
"""

import os

from . import fallback

if os.environ.get("PLG_PURE_PYTHON"):
    _impl = fallback
    BACKEND = "fallback"
else:
    try:
        from . import _speedups as _impl
        BACKEND = "compiled"
    except ImportError:
        _impl = fallback
        BACKEND = "fallback"

plg_filter_batch = _impl.plg_filter_batch
plg_sample_batch = _impl.plg_sample_batch
kalman_filter_batch = _impl.kalman_filter_batch


def available_backends():
    """Importable kernel backends by name; always includes the fallback."""
    backends = {"fallback": fallback}
    try:
        from . import _speedups
        backends["compiled"] = _speedups
    except ImportError:
        pass
    return backends
