"""Kernel backend selection.

The compiled extension is used when it has been built; otherwise the numpy
fallback is imported.  Set ``FANETQ_PURE_PYTHON=1`` to force the fallback.
"""
import os

if os.environ.get("FANETQ_PURE_PYTHON", "") not in ("", "0"):
    from . import _kernels_py as _impl
else:
    try:
        from . import _kernels as _impl
    except ImportError:  # extension not built
        from . import _kernels_py as _impl

BACKEND = _impl.BACKEND
positions_at = _impl.positions_at
contact = _impl.contact
remaining_estimates = _impl.remaining_estimates
echo_update = _impl.echo_update
