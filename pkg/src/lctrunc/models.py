"""Concrete block generators: M/M/s retrial queue, generic LD-QBD, M/M/1."""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DomainError, StructureError
from .generator import BlockGenerator, LevelLayout


@dataclass(frozen=True)
class RetrialParams:
    """M/M/s retrial queue: ``s`` servers, arrival ``lam``, service ``mu``, retrial ``eta``.

    Level ``k`` is the orbit size and the phase ``i = 0..s`` the number of busy
    servers.
    """

    s: int
    lam: float
    mu: float
    eta: float

    def __post_init__(self):
        if int(self.s) != self.s or self.s < 1:
            raise DomainError(f"server count must be a positive integer, got {self.s}")
        for name in ("lam", "mu", "eta"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be positive and finite, got {v}")

    @property
    def rho(self) -> float:
        return self.lam / (self.s * self.mu)

    @property
    def stable(self) -> bool:
        return self.rho < 1

    @classmethod
    def from_rho(cls, rho: float, s: int = 50, mu: float = 1.0, eta: float | None = None) -> "RetrialParams":
        """Parameters with ``lam = rho * s * mu``; ``eta`` defaults to ``s``."""
        return cls(s, rho * s * mu, mu, float(s) if eta is None else eta)

    def require_stable(self):
        if not self.stable:
            raise DomainError(f"traffic intensity rho = {self.rho:.6g} must be < 1")


def retrial_blocks(p: RetrialParams, k: int):
    """``(A_k(-1), A_k(0), A_k(1))``; ``A_0(-1)`` is ``None``."""
    s, lam, mu, eta = p.s, p.lam, p.mu, p.eta
    m = s + 1
    i = np.arange(m)
    a0 = np.zeros((m, m))
    a0[i[:-1], i[:-1] + 1] = lam
    a0[i[1:], i[1:] - 1] = mu * i[1:]
    psi = lam + mu * i + k * eta
    psi[s] = lam + s * mu
    a0[i, i] = -psi
    ap = np.zeros((m, m))
    ap[s, s] = lam
    if k == 0:
        return None, a0, ap
    am = np.zeros((m, m))
    am[i[:-1], i[:-1] + 1] = k * eta
    return am, a0, ap


def _qbd_block_fn(qbd):
    def block_fn(k, l):
        am, a0, ap = qbd(k)
        if l == k:
            return a0
        if l == k + 1:
            return ap
        if l == k - 1:
            return am
        return None
    return block_fn


def retrial_generator(p: RetrialParams) -> BlockGenerator:
    def qbd(k):
        return retrial_blocks(p, k)

    return BlockGenerator(
        LevelLayout(p.s + 1, p.s + 1), _qbd_block_fn(qbd), 1, 1, qbd_fn=qbd,
        name=f"retrial(s={p.s}, lam={p.lam:g}, mu={p.mu:g}, eta={p.eta:g})",
    )


def mm1_generator(lam: float, mu: float) -> BlockGenerator:
    """Birth-death chain with one phase per level."""
    if not (lam > 0 and mu > 0):
        raise DomainError("M/M/1 rates must be positive")

    def qbd(k):
        if k == 0:
            return None, np.array([[-lam]]), np.array([[lam]])
        return np.array([[mu]]), np.array([[-(lam + mu)]]), np.array([[lam]])

    return BlockGenerator(LevelLayout(1, 1), _qbd_block_fn(qbd), 1, 1, qbd_fn=qbd,
                          name=f"mm1(lam={lam:g}, mu={mu:g})")


def _as_block(a, shape, what):
    if a is None or (np.size(a) == 0 and 0 in shape):
        return np.zeros(shape)
    arr = np.atleast_2d(np.asarray(a, dtype=float))
    if arr.shape != shape:
        raise StructureError(f"{what} has shape {arr.shape}, expected {shape}")
    return arr


def ldqbd_generator(levels: Sequence, layout: LevelLayout | None = None,
                    complete_diagonal: bool = False, name: str = "ldqbd") -> BlockGenerator:
    """LD-QBD from a list of per-level triples ``(A_k(-1), A_k(0), A_k(1))``.

    Entry ``k`` of ``levels`` describes level ``k``; levels past the end of the
    list reuse the last triple (which must therefore describe a level >= 1).
    ``A_0(-1)`` is ignored.  With ``complete_diagonal`` each diagonal entry of
    ``A_k(0)`` is overwritten so that its row sums to zero.
    """
    if len(levels) == 0:
        raise StructureError("at least one level triple is required")
    if layout is None:
        s0 = np.atleast_2d(np.asarray(levels[0][1], dtype=float)).shape[0]
        s1 = s0 if len(levels) == 1 else np.atleast_2d(np.asarray(levels[1][1], dtype=float)).shape[0]
        layout = LevelLayout(s0, s1)
    if len(levels) == 1 and layout.s0 != layout.s1:
        raise StructureError("a repeating level >= 1 triple is required when s0 != s1")

    fixed = []
    for k, triple in enumerate(levels):
        if len(triple) != 3:
            raise StructureError(f"level {k}: expected a triple (Aminus, Azero, Aplus)")
        am, a0, ap = triple
        sk, sup = layout.size(k), layout.size(k + 1)
        a0 = _as_block(a0, (sk, sk), f"level {k} Azero").copy()
        ap = _as_block(ap, (sk, sup), f"level {k} Aplus")
        am = None if k == 0 else _as_block(am, (sk, layout.size(k - 1)), f"level {k} Aminus")
        if complete_diagonal:
            off = a0.sum(axis=1) - np.diag(a0) + ap.sum(axis=1)
            if am is not None:
                off = off + am.sum(axis=1)
            np.fill_diagonal(a0, -off)
        fixed.append((am, a0, ap))

    rep = fixed[-1]
    if len(fixed) == 1:
        # level 0 repeats upward; it has no A(-1), so higher levels get none either
        rep = (np.zeros((layout.s1, layout.s1)), rep[1], rep[2])

    def qbd(k):
        if k < len(fixed):
            return fixed[k]
        return rep

    return BlockGenerator(layout, _qbd_block_fn(qbd), 1, 1, qbd_fn=qbd, name=name)


def load_block_file(path, complete_diagonal: bool = False) -> BlockGenerator:
    """Read an LD-QBD from a JSON array of ``{"k", "Aminus", "Azero", "Aplus"}`` records."""
    records = json.loads(Path(path).read_text())
    if not isinstance(records, list) or not records:
        raise StructureError(f"{path}: expected a nonempty JSON array of level records")
    by_k = {}
    for rec in records:
        try:
            k = int(rec["k"])
        except (KeyError, TypeError, ValueError) as exc:
            raise StructureError(f"{path}: level record without an integer 'k'") from exc
        by_k[k] = (rec.get("Aminus"), rec["Azero"], rec["Aplus"])
    ks = sorted(by_k)
    if ks != list(range(len(ks))):
        raise StructureError(f"{path}: levels must be 0..K without gaps, got {ks}")
    return ldqbd_generator([by_k[k] for k in ks], complete_diagonal=complete_diagonal,
                           name=Path(path).stem)


def save_block_file(Q: BlockGenerator, levels: int, path) -> None:
    """Write blocks of levels ``0..levels`` in the JSON block-file format."""
    out = []
    for k in range(levels + 1):
        am, a0, ap = Q.qbd_blocks(k)
        out.append({
            "k": k,
            "Aminus": [] if am is None else am.tolist(),
            "Azero": a0.tolist(),
            "Aplus": ap.tolist(),
        })
    Path(path).write_text(json.dumps(out))


@lru_cache(maxsize=None)
def _cached_load(path, complete_diagonal):
    return load_block_file(path, complete_diagonal)


def model_from_descriptor(desc: dict, base_dir=None):
    """Build ``(generator, params)`` from a model descriptor mapping.

    Recognised kinds: ``{"model": "retrial", "s", "lambda" | "rho", "mu", "eta"}``,
    ``{"model": "mm1", "lambda", "mu"}`` and
    ``{"model": "ldqbd_file", "path", "complete_diagonal"}``.  ``params`` is a
    :class:`RetrialParams` for the retrial model and ``None`` otherwise.
    """
    kind = desc.get("model")
    if kind == "retrial":
        s = int(desc.get("s", 50))
        mu = float(desc.get("mu", 1.0))
        eta = float(desc.get("eta", s))
        if "lambda" in desc:
            lam = float(desc["lambda"])
        elif "rho" in desc:
            lam = float(desc["rho"]) * s * mu
        else:
            raise StructureError("retrial descriptor needs 'lambda' or 'rho'")
        p = RetrialParams(s, lam, mu, eta)
        return retrial_generator(p), p
    if kind == "mm1":
        return mm1_generator(float(desc["lambda"]), float(desc["mu"])), None
    if kind == "ldqbd_file":
        path = Path(desc["path"])
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        return _cached_load(str(path), bool(desc.get("complete_diagonal", False))), None
    raise StructureError(f"unknown model kind {kind!r}")


def load_model(path):
    """Read a JSON model descriptor file and build its generator."""
    path = Path(path)
    return model_from_descriptor(json.loads(path.read_text()), base_dir=path.parent)
