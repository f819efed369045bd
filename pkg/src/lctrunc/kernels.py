"""Backend selection for the level-recursion kernels.

The compiled extension is used when it imports; set ``LCTRUNC_PURE_PYTHON=1``
to force the numpy fallback.  Both expose ``rmatrix_backward``,
``forward_rows`` and ``sweep_colmin`` with identical semantics.
"""

import os

import numpy as np

from . import _pykernels

_compiled = None
if os.environ.get("LCTRUNC_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

BACKEND = "compiled" if _compiled is not None else "python"


def get_backend(name=None):
    """Return the kernel module for ``name`` ("compiled", "python" or None for the default)."""
    if name is None:
        name = BACKEND
    if name == "python":
        return _pykernels
    if name == "compiled":
        if _compiled is None:
            raise ImportError("compiled kernels are not available")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def rmatrix_backward(ap, dg, am, terminal, lo, backend=None):
    return get_backend(backend).rmatrix_backward(_c(ap), _c(dg), _c(am), _c(terminal), int(lo))


def forward_rows(x0, r, lo, hi, backend=None):
    return get_backend(backend).forward_rows(_c(np.atleast_2d(x0)), _c(r), int(lo), int(hi))


def sweep_colmin(x0, r, lo, hi, backend=None):
    return get_backend(backend).sweep_colmin(_c(np.atleast_2d(x0)), _c(r), int(lo), int(hi))
