"""Pure-numpy level-recursion kernels (fallback for the compiled ``_kernels``).

All arrays are indexed by absolute level and hold square ``m x m`` blocks;
slots outside the range a routine touches are ignored.
"""

import warnings

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve

from .errors import SingularityError


def _right_solve(x, p, level):
    # returns p @ inv(x); x^T is column dominant, so pivoting keeps the diagonal
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LinAlgWarning)  # reported as SingularityError below
        lu, piv = lu_factor(x.T, check_finite=False)
    if np.any(np.diag(lu) == 0.0):
        raise SingularityError(f"singular pivot block at level {level}")
    return lu_solve((lu, piv), p.T, check_finite=False).T


def rmatrix_backward(ap, dg, am, terminal, lo):
    """Backward R-matrix recursion of block Gaussian elimination.

    With ``hi = ap.shape[0]``::

        R[hi-1] = ap[hi-1] @ inv(terminal)
        R[l]    = ap[l] @ inv(dg[l+1] - R[l+1] @ am[l+2]),   l = hi-2, ..., lo

    Returns an array of shape ``(hi, m, m)``; entries below ``lo`` are zero.
    """
    ap = np.asarray(ap, dtype=float)
    hi, m = ap.shape[0], ap.shape[1]
    out = np.zeros((hi, m, m))
    if hi <= lo:
        return out
    out[hi - 1] = _right_solve(np.asarray(terminal, dtype=float), ap[hi - 1], hi)
    for l in range(hi - 2, lo - 1, -1):
        x = dg[l + 1] - out[l + 1] @ am[l + 2]
        out[l] = _right_solve(x, ap[l], l + 1)
    return out


def forward_rows(x0, r, lo, hi):
    """Stack ``x_lo = x0`` and ``x_{l+1} = x_l @ r[l]`` for ``l = lo..hi-1``."""
    x = np.asarray(x0, dtype=float)
    out = np.empty((hi - lo + 1,) + x.shape)
    out[0] = x
    for j, l in enumerate(range(lo, hi)):
        x = x @ r[l]
        out[j + 1] = x
    return out


def sweep_colmin(x0, r, lo, hi):
    """Column minima of ``x0 @ r[lo] @ ... @ r[l]`` for ``l = lo..hi-1``.

    Row ``j`` of the result holds the minima after ``j + 1`` factors; the
    intermediate products are never stored.
    """
    x = np.asarray(x0, dtype=float)
    out = np.empty((max(hi - lo, 0), x.shape[1]))
    for j, l in enumerate(range(lo, hi)):
        x = x @ r[l]
        out[j] = x.min(axis=0)
    return out
