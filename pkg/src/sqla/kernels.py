"""Backend selection for the sampling kernels.

The compiled extension ``sqla._kernels`` is used when it imports; otherwise
the numpy twin in ``sqla._kernels_py`` is. Set ``SQLA_PURE_PYTHON=1`` to
force the fallback.
"""
import os

from . import _kernels_py as python_backend

compiled_backend = None
if not os.environ.get("SQLA_PURE_PYTHON"):
    try:
        from . import _kernels as compiled_backend
    except ImportError:
        compiled_backend = None

_active = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "compiled" if compiled_backend is not None else "python"

capacity = _active.capacity
build_tree = _active.build_tree
descend = _active.descend
descend_rows = _active.descend_rows
matvec_entries = _active.matvec_entries
rejection_attempts = _active.rejection_attempts
centroid_estimates = _active.centroid_estimates
