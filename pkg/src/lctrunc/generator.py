"""Infinite block-structured generators and their finite truncations.

States are pairs ``(k, i)``: level ``k >= 0`` and phase ``i``.  Level 0 has
``s0`` phases and every level ``k >= 1`` has ``s1`` phases.  A finite
truncation at level ``n`` keeps levels ``0..n`` and flattens states in
lexicographic order, so state ``(k, i)`` sits at row ``offset(k) + i``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .errors import StructureError

DEFAULT_TOL = 1e-10


@dataclass(frozen=True)
class LevelLayout:
    """Phase counts: ``s0`` on level 0, ``s1`` on every higher level."""

    s0: int
    s1: int

    def __post_init__(self):
        if self.s0 < 1 or self.s1 < 1:
            raise StructureError(f"level sizes must be >= 1, got ({self.s0}, {self.s1})")

    def size(self, k: int) -> int:
        return self.s0 if k == 0 else self.s1

    def offset(self, k: int) -> int:
        return 0 if k == 0 else self.s0 + (k - 1) * self.s1

    def order(self, n: int) -> int:
        """Number of states on levels ``0..n``."""
        return self.s0 + n * self.s1

    def index(self, k: int, i: int) -> int:
        return self.offset(k) + i

    def state(self, idx: int) -> tuple[int, int]:
        if idx < self.s0:
            return 0, idx
        k, i = divmod(idx - self.s0, self.s1)
        return k + 1, i

    def level_of(self, n: int) -> np.ndarray:
        """Level index of each row of an order-``n`` truncation."""
        return np.concatenate(
            [np.zeros(self.s0, dtype=int), np.repeat(np.arange(1, n + 1), self.s1)]
        )


@dataclass(frozen=True)
class BlockGenerator:
    """Lazy provider of the blocks ``Q(k; l)`` of an infinite q-matrix.

    ``block_fn(k, l)`` may return ``None`` for a zero block.  ``lower_bandwidth``
    of ``None`` means jumps down may reach any level.  ``qbd_fn``, when given,
    returns the triple ``(A_k(-1), A_k(0), A_k(1))`` (with ``A_0(-1) = None``)
    and enables the block-tridiagonal fast paths.
    """

    layout: LevelLayout
    block_fn: Callable[[int, int], Optional[np.ndarray]]
    upper_bandwidth: int
    lower_bandwidth: Optional[int] = None
    qbd_fn: Optional[Callable[[int], tuple]] = field(default=None, compare=False)
    name: str = "generator"

    def __post_init__(self):
        if self.upper_bandwidth is None:
            raise StructureError(
                "unbounded upward jumps are not supported; declare a finite upper_bandwidth"
            )
        if self.upper_bandwidth < 0 or (self.lower_bandwidth is not None and self.lower_bandwidth < 0):
            raise StructureError("bandwidths must be nonnegative")

    @property
    def is_qbd(self) -> bool:
        return self.upper_bandwidth <= 1 and self.lower_bandwidth is not None and self.lower_bandwidth <= 1

    def in_band(self, k: int, l: int) -> bool:
        if l - k > self.upper_bandwidth:
            return False
        if self.lower_bandwidth is not None and k - l > self.lower_bandwidth:
            return False
        return True

    def block(self, k: int, l: int) -> np.ndarray:
        """Return ``Q(k; l)`` as a dense array of the declared shape."""
        if k < 0 or l < 0:
            raise StructureError(f"negative level in block({k}, {l})")
        shape = (self.layout.size(k), self.layout.size(l))
        if not self.in_band(k, l):
            return np.zeros(shape)
        out = self.block_fn(k, l)
        if out is None:
            return np.zeros(shape)
        out = np.asarray(out, dtype=float)
        if out.shape != shape:
            raise StructureError(f"block({k}, {l}) has shape {out.shape}, expected {shape}")
        return out

    def column_range(self, k: int, top: Optional[int] = None) -> range:
        """Levels ``l`` with a possibly nonzero ``Q(k; l)``, optionally capped at ``top``."""
        lo = 0 if self.lower_bandwidth is None else max(0, k - self.lower_bandwidth)
        hi = k + self.upper_bandwidth
        if top is not None:
            hi = min(hi, top)
        return range(lo, hi + 1)

    def qbd_blocks(self, k: int) -> tuple:
        """``(A_k(-1), A_k(0), A_k(1))`` for a bandwidth-(1, 1) generator."""
        if not self.is_qbd:
            raise StructureError("qbd_blocks requires bandwidths (1, 1)")
        if self.qbd_fn is not None:
            am, a0, ap = self.qbd_fn(k)
            am = None if k == 0 else np.asarray(am, dtype=float)
            return am, np.asarray(a0, dtype=float), np.asarray(ap, dtype=float)
        am = None if k == 0 else self.block(k, k - 1)
        return am, self.block(k, k), self.block(k, k + 1)

    def scale_rows(self, weights: Callable[[int], np.ndarray], name: Optional[str] = None) -> "BlockGenerator":
        """Generator whose row ``(k, i)`` is multiplied by ``weights(k)[i]``."""
        base = self

        def block_fn(k, l):
            return np.asarray(weights(k), dtype=float)[:, None] * base.block(k, l)

        qbd_fn = None
        if base.is_qbd:
            def qbd_fn(k):
                w = np.asarray(weights(k), dtype=float)[:, None]
                am, a0, ap = base.qbd_blocks(k)
                return (None if am is None else w * am), w * a0, w * ap

        return BlockGenerator(
            base.layout, block_fn, base.upper_bandwidth, base.lower_bandwidth,
            qbd_fn=qbd_fn, name=name or f"scaled({base.name})",
        )


def generator_difference(a: BlockGenerator, b: BlockGenerator) -> BlockGenerator:
    """Blockwise ``a - b`` (used for perturbation norms)."""
    if a.layout != b.layout:
        raise StructureError("generators have different level layouts")
    lower = None
    if a.lower_bandwidth is not None and b.lower_bandwidth is not None:
        lower = max(a.lower_bandwidth, b.lower_bandwidth)
    return BlockGenerator(
        a.layout,
        lambda k, l: a.block(k, l) - b.block(k, l),
        max(a.upper_bandwidth, b.upper_bandwidth),
        lower,
        name=f"{a.name}-{b.name}",
    )


@dataclass(frozen=True)
class FiniteQMatrix:
    """A finite q-matrix on levels ``0..n``, stored as CSR."""

    n: int
    layout: LevelLayout
    entries: sp.csr_matrix
    conservative: bool

    @property
    def order(self) -> int:
        return self.entries.shape[0]

    def toarray(self) -> np.ndarray:
        return self.entries.toarray()

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.entries.sum(axis=1)).ravel()

    def max_abs_entry(self) -> float:
        return float(abs(self.entries).max()) if self.entries.nnz else 0.0

    def level_slice(self, k: int) -> slice:
        o = self.layout.offset(k)
        return slice(o, o + self.layout.size(k))


@dataclass
class ValidationReport:
    passed: bool
    max_defect: float
    worst_state: tuple[int, int]
    row_defects: np.ndarray
    negative_offdiag: list = field(default_factory=list)
    nonfinite: list = field(default_factory=list)
    levels: int = 0
    tol: float = DEFAULT_TOL

    def summary(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return (
            f"{status}: levels 0..{self.levels}, max row-sum defect {self.max_defect:.3e} "
            f"at {self.worst_state}, {len(self.negative_offdiag)} negative off-diagonal entries"
        )


def validate_qmatrix(Q: BlockGenerator, max_level: int, tol: float = DEFAULT_TOL) -> ValidationReport:
    """Check sign structure and conservativeness on levels ``0..max_level``."""
    if max_level < 1:
        raise ValueError("max_level must be >= 1")
    if tol <= 0:
        raise ValueError("tol must be positive")
    lay = Q.layout
    defects = np.zeros(lay.order(max_level))
    negatives = []
    nonfinite = []
    for k in range(max_level + 1):
        rows = np.zeros(lay.size(k))
        for l in Q.column_range(k):
            blk = Q.block(k, l)
            if not np.all(np.isfinite(blk)):
                nonfinite.append((k, l))
                continue
            rows += blk.sum(axis=1)
            off = blk.copy()
            if l == k:
                np.fill_diagonal(off, 0.0)
            for i, j in zip(*np.nonzero(off < 0)):
                negatives.append(((k, int(i)), (l, int(j)), float(off[i, j])))
        defects[lay.offset(k): lay.offset(k) + lay.size(k)] = np.abs(rows)
    worst = int(np.argmax(defects))
    max_defect = float(defects[worst])
    return ValidationReport(
        passed=max_defect <= tol and not negatives and not nonfinite,
        max_defect=max_defect,
        worst_state=lay.state(worst),
        row_defects=defects,
        negative_offdiag=negatives,
        nonfinite=nonfinite,
        levels=max_level,
        tol=tol,
    )


def tail_block_sum(Q: BlockGenerator, k: int, n: int) -> np.ndarray:
    """``sum_{m > n, m != k} Q(k; m)`` using the declared upper bandwidth."""
    out = np.zeros((Q.layout.size(k), Q.layout.s1))
    for m in range(n + 1, k + Q.upper_bandwidth + 1):
        if m != k:
            out += Q.block(k, m)
    return out


def _assemble(Q: BlockGenerator, n: int, augment: bool) -> sp.csr_matrix:
    lay = Q.layout
    rows, cols, vals = [], [], []

    def put(k, l, blk):
        r, c = np.nonzero(blk)
        if r.size:
            rows.append(r + lay.offset(k))
            cols.append(c + lay.offset(l))
            vals.append(blk[r, c])

    for k in range(n + 1):
        for l in Q.column_range(k, top=n):
            blk = Q.block(k, l)
            if augment and l == n:
                blk = blk + tail_block_sum(Q, k, n)
            put(k, l, blk)
    m = lay.order(n)
    if rows:
        r, c, v = np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
    else:
        r = c = np.zeros(0, dtype=int)
        v = np.zeros(0)
    return sp.csr_matrix((v, (r, c)), shape=(m, m))


def northwest_truncation(Q: BlockGenerator, n: int) -> FiniteQMatrix:
    """The ``|F_n| x |F_n|`` northwest corner of ``Q`` (levels ``0..n``)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return FiniteQMatrix(n, Q.layout, _assemble(Q, n, augment=False), conservative=False)


def lc_block_augment(Q: BlockGenerator, n: int) -> FiniteQMatrix:
    """Last-column-block-augmented truncation: the cut-off upward mass goes to block column ``n``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return FiniteQMatrix(n, Q.layout, _assemble(Q, n, augment=True), conservative=True)


def finite_from_dense(entries, layout: LevelLayout, n: Optional[int] = None, conservative: Optional[bool] = None, tol: float = DEFAULT_TOL) -> FiniteQMatrix:
    """Wrap an explicit matrix; the conservative flag is inferred when not given."""
    arr = np.atleast_2d(np.asarray(entries, dtype=float))
    if arr.shape[0] != arr.shape[1]:
        raise StructureError("q-matrix must be square")
    if n is None:
        n, rem = divmod(arr.shape[0] - layout.s0, layout.s1)
        if rem or n < 0:
            raise StructureError(f"order {arr.shape[0]} does not fit layout {layout}")
    elif layout.order(n) != arr.shape[0]:
        raise StructureError(f"order {arr.shape[0]} does not match layout at n={n}")
    if conservative is None:
        conservative = bool(np.all(np.abs(arr.sum(axis=1)) <= tol))
    return FiniteQMatrix(n, layout, sp.csr_matrix(arr), conservative)
