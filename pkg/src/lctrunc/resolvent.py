"""Truncated resolvent ``Phi_N = (I - Q_{F_N} / beta)^{-1}`` and the scalar phi-bar.

phi-bar is the largest column minimum of ``Phi_N`` taken over the rows of
the drift set ``F_K`` (levels ``0..K``).  It only needs those rows, so no full
inverse is formed.  For block-tridiagonal generators the levels above ``K``
are eliminated with R-matrices and only the ``F_K`` square part is factored.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.linalg.lapack import dgbtrf, dgbtrs
from scipy.sparse.linalg import splu

from . import kernels
from .errors import NonConvergenceError, NotFoundError, SingularityError, StructureError
from .generator import BlockGenerator, FiniteQMatrix, LevelLayout, northwest_truncation

log = logging.getLogger(__name__)

DEFAULT_N_OFFSET = 100
# store full F_K x F_N row blocks only below this many entries
ROW_STORE_LIMIT = 5_000_000
_CHUNK = 1024


def _row_indices(layout: LevelLayout, row_set, order: int) -> np.ndarray:
    if row_set is None:
        return np.arange(order)
    idx = []
    for r in row_set:
        if isinstance(r, tuple):
            idx.append(layout.index(*r))
        else:
            idx.append(int(r))
    idx = np.asarray(idx, dtype=int)
    if idx.size and (idx.min() < 0 or idx.max() >= order):
        raise StructureError("requested resolvent row outside the truncation")
    return idx


def resolvent_rows(Qfin: FiniteQMatrix, beta: float, row_set: Optional[Sequence] = None) -> np.ndarray:
    """Rows of ``(I - Qfin / beta)^{-1}`` by sparse LU of the transposed system.

    ``row_set`` holds flat indices or ``(level, phase)`` pairs; default is every row.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    m = Qfin.order
    rows = _row_indices(Qfin.layout, row_set, m)
    A = (sp.identity(m, format="csc") - Qfin.entries.T.tocsc() / beta).tocsc()
    try:
        lu = splu(A)
    except RuntimeError as exc:
        raise SingularityError(f"I - Q/beta is singular: {exc}") from exc
    out = np.empty((rows.size, m))
    for a in range(0, rows.size, _CHUNK):
        sel = rows[a: a + _CHUNK]
        rhs = np.zeros((m, sel.size))
        rhs[sel, np.arange(sel.size)] = 1.0
        out[a: a + sel.size] = lu.solve(rhs).T
    if not np.all(np.isfinite(out)):
        raise SingularityError("non-finite resolvent entries")
    return out


def resolvent_neumann(Qfin: FiniteQMatrix, beta: float, tol: float = 1e-14,
                      max_terms: int = 1_000_000, row_set: Optional[Sequence] = None) -> np.ndarray:
    """Same rows as :func:`resolvent_rows` from the nonnegative series.

    With ``qbar = max|q_ii| / beta`` and ``F = I + (Q/beta - I)/(qbar + 1)``
    (a nonnegative substochastic matrix), ``Phi = sum_m F^m / (qbar + 1)``.
    Summing nonnegative terms avoids cancellation.  Stops once the added
    term has infinity norm ``<= tol``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if not beta > 0:
        raise ValueError("beta must be positive")
    m = Qfin.order
    rows = _row_indices(Qfin.layout, row_set, m)
    Q = Qfin.entries.tocsr()
    qbar = float(np.abs(Q.diagonal()).max()) / beta if m else 0.0
    scale = 1.0 / (qbar + 1.0)
    F = (sp.identity(m, format="csr") + (Q / beta - sp.identity(m, format="csr")) * scale).tocsr()
    Ft = F.T.tocsr()
    term = np.zeros((rows.size, m))
    term[np.arange(rows.size), rows] = scale
    total = term.copy()
    for _ in range(max_terms):
        term = (Ft @ term.T).T
        total += term
        if np.abs(term).sum(axis=1).max(initial=0.0) <= tol:
            return total
    raise NonConvergenceError(f"Neumann series did not reach tol={tol:g} in {max_terms} terms")


def phi_bar(rows: np.ndarray, K: int, layout: LevelLayout) -> float:
    """Largest column minimum of the ``F_K`` rows; 0 when no column is positive."""
    rows = np.atleast_2d(rows)
    if rows.shape[0] != layout.order(K):
        raise StructureError(f"expected {layout.order(K)} rows covering F_K, got {rows.shape[0]}")
    best = float(rows.min(axis=0).max())
    if best <= 0:
        log.warning("no positive column min over F_%d; raise N", K)
        return 0.0
    return best


@dataclass
class ResolventSummary:
    """phi-bar at ``(beta, K, N)`` plus the column minima it came from.

    ``colmin[c]`` is the minimum of column ``c`` of ``Phi_N`` over the ``F_K``
    rows.  ``corner_min`` is the minimum over the ``F_K x F_K`` corner, which
    must be positive for the bounds to apply.  ``rows`` is kept only when
    small enough or explicitly requested.
    """

    beta: float
    K: int
    N: int
    phi_bar: float
    colmin: np.ndarray
    corner_min: float
    layout: LevelLayout
    rows: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def positive(self) -> bool:
        return self.corner_min > 0

    @property
    def argmax_state(self) -> tuple[int, int]:
        return self.layout.state(int(np.argmax(self.colmin)))

    @property
    def one_over_beta_phi(self) -> float:
        return np.inf if self.phi_bar <= 0 else 1.0 / (self.beta * self.phi_bar)


def _summary_generic(Q, K, N, beta, store_rows):
    Qn = northwest_truncation(Q, N)
    rows = resolvent_rows(Qn, beta, range(Q.layout.order(K)))
    colmin = rows.min(axis=0)
    corner = float(rows[:, : Q.layout.order(K)].min())
    pb = max(float(colmin.max()), 0.0)
    return ResolventSummary(beta, K, N, pb, colmin, corner, Q.layout, rows if store_rows else None)


def _banded(B: sp.spmatrix):
    B = B.tocoo()
    d = B.col - B.row
    ku = int(max(d.max(initial=0), 0))
    kl = int(max(-d.min(initial=0), 0))
    n = B.shape[0]
    ab = np.zeros((2 * kl + ku + 1, n))
    ab[kl + ku + B.row - B.col, B.col] = B.data
    return ab, kl, ku


def _solve_square(B, beta, threads, want_cols):
    """Column minima of ``beta * B^{-1}`` and the trailing ``want_cols`` columns."""
    # factor the transpose: it is column diagonally dominant, so partial
    # pivoting keeps the diagonal and tiny entries of B^{-1} keep their sign
    ab, kl, ku = _banded(B.T)
    lu, piv, info = dgbtrf(ab, kl, ku)
    if info != 0:
        raise SingularityError(f"banded factorization failed (info={info})")
    n = B.shape[0]
    colmin = np.empty(n)
    starts = list(range(0, n, _CHUNK))

    def work(a):
        b = min(n, a + _CHUNK)
        rhs = np.zeros((n, b - a), order="F")
        rhs[np.arange(a, b), np.arange(b - a)] = beta
        x, inf = dgbtrs(lu, kl, ku, rhs, piv, trans=1, overwrite_b=1)
        if inf != 0:
            raise SingularityError(f"banded solve failed (info={inf})")
        return a, b, x

    full = np.empty((n, n)) if want_cols is None else None
    pieces = []
    if threads and threads > 1:
        ex = ThreadPoolExecutor(threads)
        results = ex.map(work, starts)
    else:
        ex = None
        results = map(work, starts)
    try:
        for a, b, x in results:
            colmin[a:b] = x.min(axis=0)
            if full is not None:
                full[:, a:b] = x
            elif b > n - want_cols:
                pieces.append(x[:, max(0, n - want_cols - a):])
    finally:
        if ex is not None:
            ex.shutdown()
    tail = full if full is not None else np.hstack(pieces)
    if not np.all(np.isfinite(colmin)):
        raise SingularityError("non-finite resolvent entries")
    return colmin, tail


def _summary_qbd(Q, K, N, beta, store_rows, threads, backend):
    lay = Q.layout
    m = lay.s1
    blocks = [Q.qbd_blocks(k) for k in range(N + 1)]
    nK = lay.order(K)
    sq = northwest_truncation(Q, K).entries if K >= 1 else sp.csr_matrix(blocks[0][1])
    B = (beta * sp.identity(nK, format="csr") - sq).tolil()

    R = None
    R0 = None
    if N > K:
        lo = max(K, 1)
        I = np.eye(m)
        terminal = beta * I - blocks[N][1]
        if N > lo:
            ap = np.zeros((N, m, m))
            dg = np.zeros((N + 1, m, m))
            am = np.zeros((N + 1, m, m))
            for k in range(lo, N + 1):
                a_m, a_0, a_p = blocks[k]
                dg[k] = beta * I - a_0
                if k > lo:  # am[lo] is never read; at level 1 it may not be square
                    am[k] = a_m
                if k < N:
                    ap[k] = a_p
            R = kernels.rmatrix_backward(ap, dg, am, terminal, lo, backend=backend)
        if K == 0:
            # level 0 may have s0 != s1, so its factor is done here
            piv = terminal if N == 1 else beta * I - blocks[1][1] - R[1] @ blocks[2][0]
            R0 = np.linalg.solve(piv.T, blocks[0][2].T).T
            schur = R0 @ blocks[1][0]
        else:
            schur = R[K] @ blocks[K + 1][0]
        o = lay.offset(K)
        sK = lay.size(K)
        blk = B[o: o + sK, o: o + sK].toarray() - schur
        B[o: o + sK, o: o + sK] = blk

    keep_full = store_rows or nK * lay.order(N) <= ROW_STORE_LIMIT
    colmin_sq, X = _solve_square(B.tocsr(), beta, threads, None if keep_full else lay.size(K))
    corner = float(colmin_sq.min())
    parts = [colmin_sq]
    row_parts = [X] if keep_full else None
    if N > K:
        G = X[:, -lay.size(K):]
        lo = K
        if K == 0:
            G = G @ R0
            parts.append(G.min(axis=0))
            if keep_full:
                row_parts.append(G)
            lo = 1
        if N > lo:
            if keep_full:
                full = kernels.forward_rows(G, R, lo, N, backend=backend)[1:]
                parts.append(full.min(axis=1).reshape(-1))
                row_parts.append(np.concatenate(list(full), axis=1))
            else:
                parts.append(kernels.sweep_colmin(G, R, lo, N, backend=backend).reshape(-1))
    colmin = np.concatenate(parts)
    rows = np.concatenate(row_parts, axis=1) if keep_full else None
    pb = max(float(colmin.max()), 0.0)
    return ResolventSummary(beta, K, N, pb, colmin, corner, lay, rows)


def resolvent_summary(Q: BlockGenerator, K: int, N: Optional[int] = None, beta: float = 1.0,
                      store_rows: bool = False, method: str = "auto", threads: int = 1,
                      backend=None) -> ResolventSummary:
    """phi-bar of the level-``N`` northwest truncation over drift set ``F_K``.

    ``method`` is ``"qbd"`` (R-matrix elimination, bandwidth (1, 1) only),
    ``"generic"`` (sparse LU on the whole truncation) or ``"auto"``.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    if K < 0:
        raise ValueError("K must be >= 0")
    if N is None:
        N = K + DEFAULT_N_OFFSET
    if N < max(K, 1):
        raise ValueError(f"N must be >= max(K, 1), got N={N}, K={K}")
    if method == "auto":
        method = "qbd" if Q.is_qbd else "generic"
    if method == "qbd":
        if not Q.is_qbd:
            raise StructureError("qbd resolvent path needs bandwidths (1, 1)")
        return _summary_qbd(Q, K, N, beta, store_rows, threads, backend)
    if method == "generic":
        return _summary_generic(Q, K, N, beta, True if store_rows else Q.layout.order(K) * Q.layout.order(N) <= ROW_STORE_LIMIT)
    raise ValueError(f"unknown method {method!r}")


def find_valid_N(Q: BlockGenerator, K: int, beta: float, N0: int, N_max: int, **kw) -> ResolventSummary:
    """Smallest ``N`` in ``[N0, N_max]`` whose ``F_K x F_K`` resolvent corner is positive.

    Positivity can only be gained as ``N`` grows (more paths), so the search
    bisects after checking ``N0``.
    """
    if N0 < K:
        raise ValueError("N0 must be >= K")
    N0 = max(N0, 1)
    if N_max < N0:
        raise NotFoundError(f"N_max={N_max} is below N0={N0}")
    first = resolvent_summary(Q, K, N0, beta, **kw)
    if first.positive:
        return first
    top = resolvent_summary(Q, K, N_max, beta, **kw)
    if not top.positive:
        raise NotFoundError(f"F_{K} corner of the resolvent is not positive for any N <= {N_max}")
    lo, hi, best = N0, N_max, top
    while hi - lo > 1:
        mid = (lo + hi) // 2
        s = resolvent_summary(Q, K, mid, beta, **kw)
        if s.positive:
            hi, best = mid, s
        else:
            lo = mid
    return best
