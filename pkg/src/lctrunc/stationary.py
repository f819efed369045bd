"""Stationary distributions of finite conservative q-matrices.

Three solvers share one result type: a dense direct solve for any finite
matrix, the block backward recursion for LD-QBD truncations and a rank-one
shortcut for the retrial queue whose up-jump block has a single entry.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve, solve, solve_banded

from . import kernels
from .errors import SingularityError, StructureError, TailMassError
from .generator import BlockGenerator, FiniteQMatrix, LevelLayout, lc_block_augment
from .models import RetrialParams, retrial_blocks

PIVOT_RTOL = 1e-8
RESIDUAL_RTOL = 1e-9
DENSE_FALLBACK_ORDER = 4000


@dataclass(frozen=True)
class TruncatedStationary:
    """Stationary vector of the level-``n`` augmented truncation, stored flat."""

    n: int
    layout: LevelLayout
    pi: np.ndarray

    def __post_init__(self):
        if self.pi.shape != (self.layout.order(self.n),):
            raise StructureError(f"vector length {self.pi.shape} does not match n={self.n}")

    def level(self, k: int) -> np.ndarray:
        """``pi(k)``; levels above ``n`` are zero."""
        if k > self.n:
            return np.zeros(self.layout.size(k))
        o = self.layout.offset(k)
        return self.pi[o: o + self.layout.size(k)]

    @property
    def total(self) -> float:
        return float(self.pi.sum())

    def level_masses(self) -> np.ndarray:
        return np.array([self.level(k).sum() for k in range(self.n + 1)])

    def mass_at_or_above(self, k: int) -> float:
        if k > self.n:
            return 0.0
        return float(self.pi[self.layout.offset(k):].sum())

    def padded(self, n: int) -> np.ndarray:
        """Flat vector on levels ``0..n`` (zero-padded or truncated)."""
        out = np.zeros(self.layout.order(n))
        m = min(out.size, self.pi.size)
        out[:m] = self.pi[:m]
        return out

    def expect(self, f) -> float:
        """``sum pi(k,i) f(k,i)`` for a callable ``f(k) -> phase vector`` or a flat array."""
        if callable(f):
            return float(sum(self.level(k) @ np.asarray(f(k), dtype=float) for k in range(self.n + 1)))
        return float(self.pi @ np.asarray(f, dtype=float)[: self.pi.size])

    def rows(self):
        for idx, p in enumerate(self.pi):
            k, i = self.layout.state(idx)
            yield k, i, float(p)

    def to_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["level", "phase", "probability"])
            for k, i, p in self.rows():
                w.writerow([k, i, f"{p:.6e}"])

    @classmethod
    def from_csv(cls, path, layout: LevelLayout) -> "TruncatedStationary":
        with open(Path(path), newline="") as fh:
            data = [(int(r["level"]), int(r["phase"]), float(r["probability"])) for r in csv.DictReader(fh)]
        n = max(k for k, _, _ in data)
        pi = np.zeros(layout.order(n))
        for k, i, p in data:
            pi[layout.index(k, i)] = p
        return cls(n, layout, pi)


def _finish(n, layout, x):
    # clear rounding-level negatives and renormalize
    x = np.where(x < 0, 0.0, x)
    tot = x.sum()
    if not np.isfinite(tot) or tot <= 0:
        raise SingularityError("stationary solve produced no positive mass")
    return TruncatedStationary(n, layout, x / tot)


def _check_residual(x, blocks, lay, n):
    # the backward recursion amplifies rounding by roughly the up/down rate
    # ratio per level, so upward-drifting truncations can come back wrong;
    # verify x Q = 0 level by level on the augmented matrix
    x = np.asarray(x, dtype=float)
    x0, X = x[: lay.s0], x[lay.s0:].reshape(n, lay.s1)
    A0 = np.stack([blocks[k][1] for k in range(1, n + 1)])
    A0[-1] = A0[-1] + blocks[n][2]
    r = np.einsum("ki,kij->kj", X, A0)
    r[0] += x0 @ blocks[0][2]
    if n >= 2:
        r[1:] += np.einsum("ki,kij->kj", X[:-1], np.stack([blocks[k][2] for k in range(1, n)]))
        AM = np.stack([blocks[k][0] for k in range(2, n + 1)])
        r[:-1] += np.einsum("ki,kij->kj", X[1:], AM)
    r_top = x0 @ blocks[0][1] + X[0] @ blocks[1][0]
    worst = max(float(np.abs(r).max()), float(np.abs(r_top).max()))
    scale = max(float(np.abs(A0).max()), float(np.abs(blocks[0][1]).max()), float(np.abs(blocks[n][2]).max()))
    if not np.isfinite(worst) or worst > RESIDUAL_RTOL * scale:
        raise SingularityError(
            f"backward recursion is inaccurate (residual {worst:.2e}); the truncation needs a direct solve"
        )


def _null_row(M: np.ndarray, scale: float) -> np.ndarray:
    """Row vector ``x`` with ``x M = 0`` and ``x e = 1`` via last-column replacement."""
    A = np.array(M, dtype=float, copy=True)
    A[:, -1] = 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LinAlgWarning)  # zero pivots are reported below
        lu, piv = lu_factor(A.T, check_finite=False)
    small = np.abs(np.diag(lu)) < PIVOT_RTOL * max(scale, 1.0)
    if np.any(small):
        raise SingularityError(
            f"rank defect {int(small.sum()) + 1} exceeds 1: more than one closed class "
            "or a singular truncation"
        )
    rhs = np.zeros(A.shape[0])
    rhs[-1] = 1.0
    return lu_solve((lu, piv), rhs, check_finite=False)


def solve_stationary_dense(Qfin: FiniteQMatrix) -> TruncatedStationary:
    """Direct solve of ``pi Q = 0, pi e = 1`` for a finite conservative q-matrix."""
    if not Qfin.conservative:
        raise StructureError("dense stationary solve requires a conservative matrix")
    x = _null_row(Qfin.toarray(), Qfin.max_abs_entry())
    return _finish(Qfin.n, Qfin.layout, x)


def _right_inv(p, x, level):
    try:
        return solve(x.T, p.T, check_finite=False).T
    except np.linalg.LinAlgError as exc:
        raise SingularityError(f"singular pivot block at level {level}") from exc


def gaver_rmatrices(Q: BlockGenerator, n: int, backend=None):
    """R-matrices ``R_0..R_{n-1}`` of the augmented truncation at level ``n``.

    Returns ``(R0, R)`` where ``R0`` is the ``s0 x s1`` level-0 factor and
    ``R[l]`` (``l >= 1``) the ``s1 x s1`` factors; ``R[0]`` is unused.
    """
    lay = Q.layout
    m = lay.s1
    blocks = [Q.qbd_blocks(k) for k in range(n + 1)]
    terminal = -blocks[n][1] - blocks[n][2]
    if n >= 2:
        ap = np.zeros((n, m, m))
        dg = np.zeros((n + 1, m, m))
        am = np.zeros((n + 1, m, m))
        for k in range(1, n + 1):
            a_m, a_0, a_p = blocks[k]
            dg[k] = -a_0
            if k >= 2:  # A_1(-1) maps into level 0 and is never used here
                am[k] = a_m
            if k < n:
                ap[k] = a_p
        R = kernels.rmatrix_backward(ap, dg, am, terminal, 1, backend=backend)
        R0 = _right_inv(blocks[0][2], -blocks[1][1] - R[1] @ blocks[2][0], 1)
    else:
        R = np.zeros((1, m, m))
        R0 = _right_inv(blocks[0][2], terminal, 1)
    return R0, R, blocks


def solve_stationary_ldqbd(Q: BlockGenerator, n: int, backend=None) -> TruncatedStationary:
    """Backward R-matrix recursion plus forward products for an LD-QBD truncation."""
    if not Q.is_qbd:
        raise StructureError("block backward recursion needs bandwidths (1, 1)")
    if n < 1:
        raise ValueError("n must be >= 1")
    lay = Q.layout
    R0, R, blocks = gaver_rmatrices(Q, n, backend)
    M0 = blocks[0][1] + R0 @ blocks[1][0]
    x0 = _null_row(M0, float(np.abs(blocks[0][1]).max()))
    pi = np.empty(lay.order(n))
    pi[: lay.s0] = x0
    x1 = x0 @ R0
    rows = kernels.forward_rows(x1, R, 1, n, backend=backend)
    pi[lay.s0:] = rows.reshape(-1)
    res = _finish(n, lay, pi)
    _check_residual(res.pi, blocks, lay, n)
    return res


def _tridiag_T_transposed(a0: np.ndarray) -> np.ndarray:
    # banded storage of (-a0)^T for solve_banded((1, 1), ...)
    t = -a0.T
    m = t.shape[0]
    ab = np.zeros((3, m))
    ab[0, 1:] = np.diag(t, 1)
    ab[1] = np.diag(t)
    ab[2, :-1] = np.diag(t, -1)
    return ab


def retrial_xi(p: RetrialParams, n: int):
    """Row vectors ``xi_l`` with ``R_l = e_s xi_l`` for ``l = 0..n-1``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    s, lam = p.s, p.lam
    m = s + 1
    xi = np.zeros((n, m))
    rhs = np.zeros((m, 2))
    rhs[s, 0] = 1.0
    for l in range(n - 1, -1, -1):
        a0 = retrial_blocks(p, l + 1)[1]
        if l == n - 1:
            w = np.zeros(m)
            w[s] = lam
        else:
            # w = xi_{l+1} A_{l+2}(-1); A(-1) has (l+2) eta on the superdiagonal
            w = np.zeros(m)
            w[1:] = xi[l + 1, :-1] * (l + 2) * p.eta
        rhs[:, 1] = w
        try:
            yz = solve_banded((1, 1), _tridiag_T_transposed(a0), rhs, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise SingularityError(f"singular pivot block at level {l + 1}") from exc
        y, z = yz[:, 0], yz[:, 1]
        denom = 1.0 - z[s]
        if denom == 0.0 or not np.isfinite(denom):
            raise SingularityError(f"singular rank-one update at level {l + 1}")
        xi[l] = lam * (y + y[s] * z / denom)
    return xi


def solve_stationary_retrial_rank1(p: RetrialParams, n: int) -> TruncatedStationary:
    """Retrial-queue truncation via the rank-one form of the R-matrices."""
    xi = retrial_xi(p, n)
    s = p.s
    m = s + 1
    lay = LevelLayout(m, m)
    _, a0, _ = retrial_blocks(p, 0)
    am1 = retrial_blocks(p, 1)[0]
    M0 = a0.copy()
    M0[s] += xi[0] @ am1
    pi = np.empty(lay.order(n))
    x = _null_row(M0, float(np.abs(a0).max()))
    pi[:m] = x
    for k in range(1, n + 1):
        x = x[s] * xi[k - 1]
        pi[k * m: (k + 1) * m] = x
    res = _finish(n, lay, pi)
    _check_residual(res.pi, [retrial_blocks(p, k) for k in range(n + 1)], lay, n)
    return res


def solve_stationary(Q: BlockGenerator, n: int, params: RetrialParams | None = None) -> TruncatedStationary:
    """Pick the fastest applicable solver.

    The recursive solvers fall back to a dense solve when they lose positivity,
    which happens for strongly upward-drifting truncations.
    """
    try:
        if params is not None:
            return solve_stationary_retrial_rank1(params, n)
        if Q.is_qbd:
            return solve_stationary_ldqbd(Q, n)
    except SingularityError:
        if Q.layout.order(n) > DENSE_FALLBACK_ORDER:
            raise
    return solve_stationary_dense(lc_block_augment(Q, n))


def reference_stationary(Q: BlockGenerator, n_ref: int, tail_tol: float,
                         params: RetrialParams | None = None) -> TruncatedStationary:
    """High-level truncation used as a stand-in for the infinite-chain ``pi``.

    Raises :class:`TailMassError` when the top tenth of the levels carries more
    than ``tail_tol`` mass, since then the truncation has not converged.
    """
    if tail_tol <= 0:
        raise TailMassError("tail_tol must be positive")
    if n_ref < 1:
        raise ValueError("n_ref must be >= 1")
    res = solve_stationary(Q, n_ref, params)
    top = max(1, math.ceil(0.1 * (n_ref + 1)))
    tail = res.mass_at_or_above(n_ref - top + 1)
    if tail > tail_tol:
        raise TailMassError(
            f"mass {tail:.3e} on levels {n_ref - top + 1}..{n_ref} exceeds {tail_tol:.3e}"
        )
    return res


@dataclass(frozen=True)
class DeviationMatrixFinite:
    D: np.ndarray
    pi: np.ndarray

    def residuals(self, Q: np.ndarray) -> tuple[float, float]:
        """``(||-QD - (I - e pi)||_inf, ||pi D||_inf)``."""
        m = self.D.shape[0]
        r1 = -Q @ self.D - (np.eye(m) - np.outer(np.ones(m), self.pi))
        return float(np.abs(r1).max()), float(np.abs(self.pi @ self.D).max())


def deviation_matrix_finite(Qfin: FiniteQMatrix) -> DeviationMatrixFinite:
    """``D = (e pi - Q)^{-1} - e pi`` for a finite single-class q-matrix."""
    pi = solve_stationary_dense(Qfin).pi
    Q = Qfin.toarray()
    E = np.outer(np.ones(Q.shape[0]), pi)
    try:
        Z = np.linalg.solve(E - Q, np.eye(Q.shape[0]))
    except np.linalg.LinAlgError as exc:
        raise SingularityError("e pi - Q is singular") from exc
    return DeviationMatrixFinite(Z - E, pi)
