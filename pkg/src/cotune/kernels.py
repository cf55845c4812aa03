"""Selects the compiled kernels when available, else the numpy fallback.

Set ``COTUNE_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _kernels_py as python_backend

compiled_backend = None
if not os.environ.get("COTUNE_PURE_PYTHON"):
    try:
        from . import _kernels as compiled_backend  # type: ignore[no-redef]
    except ImportError:
        compiled_backend = None

backend = compiled_backend if compiled_backend is not None else python_backend
BACKEND_NAME = "compiled" if compiled_backend is not None else "python"

sq_exp_kernel = backend.sq_exp_kernel
beta_counts = backend.beta_counts
synthetic_objective = backend.synthetic_objective
