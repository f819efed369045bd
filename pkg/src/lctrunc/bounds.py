"""Error decay functions for LC-block-augmented truncations.

Every function takes phi-bar as data (a :class:`ResolventSummary` or a
float), so a single resolvent solve serves a whole curve.  Tail sums
``sum_{m>n} Q(k; m) ...`` run over the declared upper bandwidth and are
therefore exact.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .certificates import (DriftCertificate, ExponentialCertificate, RetrialTuning,
                           SharpCertificate, check_monotone)
from .errors import DomainError
from .generator import BlockGenerator
from .models import RetrialParams
from .stationary import TruncatedStationary, solve_stationary

KINDS = ("E", "E_plus", "E_sharp", "EN", "EN_plus", "EN_sharp",
         "ldqbd", "retrial_1", "retrial_sharp", "reduced_tv", "reduced_rel")


def _beta_phi(phi) -> float:
    # beta * phi-bar from a summary, or a bare product when given a float
    if hasattr(phi, "phi_bar"):
        if phi.phi_bar <= 0:
            raise DomainError("phi-bar is not positive; increase N")
        return phi.beta * phi.phi_bar
    if not phi > 0:
        raise DomainError("beta * phi-bar must be positive")
    return float(phi)


def _need_level(npi: TruncatedStationary, n: Optional[int]) -> int:
    if n is None:
        return npi.n
    if n != npi.n:
        raise DomainError(f"stationary vector is for n={npi.n}, bound requested at n={n}")
    return n


@dataclass(frozen=True)
class TailSums:
    """``sum_k npi(k) sum_{m>n} Q(k;m) x`` for ``x = v(m)``, ``v(n)`` and ``e``."""

    v_m: float
    v_n: float
    e: float


def tail_sums(Q: BlockGenerator, v, npi: TruncatedStationary) -> TailSums:
    n = npi.n
    vn = np.asarray(v(n), dtype=float)
    s_vm = s_vn = s_e = 0.0
    for k in range(max(0, n + 1 - Q.upper_bandwidth), n + 1):
        pk = npi.level(k)
        for m in range(n + 1, k + Q.upper_bandwidth + 1):
            w = pk @ Q.block(k, m)
            s_vm += float(w @ np.asarray(v(m), dtype=float))
            s_vn += float(w @ vn)
            s_e += float(w.sum())
    return TailSums(s_vm, s_vn, s_e)


def error_decay_E(Q: BlockGenerator, cert: DriftCertificate, pi_v_bound: float, phi,
                  npi: TruncatedStationary) -> float:
    """``2 sum npi(k) sum_{m>n} Q(k;m) {v(m) + v(n) + 2 (pi v + 2b / (beta phi)) e}``.

    ``pi_v_bound`` must bound ``pi v`` from above; it is never estimated here.
    """
    t = tail_sums(Q, cert.v, npi)
    const = 2.0 * (pi_v_bound + 2.0 * cert.b / _beta_phi(phi))
    return 2.0 * (t.v_m + t.v_n + const * t.e)


def error_decay_E_plus(Q: BlockGenerator, cert: DriftCertificate, pi_v_bound: float, phi,
                       npi: TruncatedStationary) -> float:
    """``4 sum npi(k) sum_{m>n} Q(k;m) {v(m) + (pi v + 2b / (beta phi)) e}``; needs monotone ``v``."""
    check_monotone(cert.v, max(npi.n + 2, 10))
    t = tail_sums(Q, cert.v, npi)
    const = pi_v_bound + 2.0 * cert.b / _beta_phi(phi)
    return 4.0 * (t.v_m + const * t.e)


def error_decay_E_sharp(cert: DriftCertificate, sharp: SharpCertificate, pi_v_bound: float,
                        phi, n: int) -> float:
    """``(4 r0 r1 b# / T(n)) [1 + (pi v + 2b / (beta phi)) / (a_min V(n+1))]``.

    Needs no stationary vector.
    """
    if any("T does not grow" in p for p in sharp.check(range(0, 101))):
        raise DomainError("T must be unbounded for the sharp bound to decay")
    head = 4.0 * sharp.r0 * sharp.r1 * sharp.b / sharp.T(n)
    return head * (1.0 + (pi_v_bound + 2.0 * cert.b / _beta_phi(phi)) / (sharp.a_min * sharp.V(n + 1)))


def EN(Q: BlockGenerator, ecert: ExponentialCertificate, phi, npi: TruncatedStationary) -> float:
    """Exponential-case E with ``pi v`` replaced by ``b / c``."""
    return error_decay_E(Q, ecert.as_drift(), ecert.pi_v_bound, phi, npi)


def EN_plus(Q: BlockGenerator, ecert: ExponentialCertificate, phi, npi: TruncatedStationary) -> float:
    return error_decay_E_plus(Q, ecert.as_drift(), ecert.pi_v_bound, phi, npi)


def EN_sharp(ecert: ExponentialCertificate, sharp: SharpCertificate, phi, n: int) -> float:
    return error_decay_E_sharp(ecert.as_drift(), sharp, ecert.pi_v_bound, phi, n)


def ldqbd_bound(Q: BlockGenerator, ecert: ExponentialCertificate, phi, npi: TruncatedStationary,
                n: Optional[int] = None) -> float:
    """``2 npi(n) A_n(1) [v(n) + v(n+1) + 2b (1/c + 2/(beta phi)) e]``."""
    if not Q.is_qbd:
        raise DomainError("ldqbd_bound needs bandwidths (1, 1)")
    n = _need_level(npi, n)
    ap = Q.qbd_blocks(n)[2]
    w = npi.level(n) @ ap
    const = 2.0 * ecert.b * (1.0 / ecert.c + 2.0 / _beta_phi(phi))
    return 2.0 * float(w @ (ecert.v(n) + ecert.v(n + 1) + const))


def retrial_bound_1(p: RetrialParams, t: RetrialTuning, ecert: ExponentialCertificate, phi,
                    npi: TruncatedStationary, n: Optional[int] = None) -> float:
    """``(4 lam / gamma) [(alpha+1)/(2c) + (gamma b / alpha^n)(1/c + 2/(beta phi))] npi(n,s) alpha^n``."""
    n = _need_level(npi, n)
    a, g, b, c = t.alpha, t.gamma, ecert.b, ecert.c
    top = float(npi.level(n)[p.s])
    x = 1.0 / c + 2.0 / _beta_phi(phi)
    if top == 0.0:  # alpha^n may be inf; the product is still zero
        return 0.0
    with np.errstate(over="ignore"):
        an = float(np.power(a, float(n)))
    return (4.0 * p.lam / g) * top * ((a + 1) / (2 * c) * an + g * b * x)


def retrial_bound_sharp(p: RetrialParams, t: RetrialTuning, ecert: ExponentialCertificate,
                        sharp: SharpCertificate, phi, n: int) -> float:
    """``(4 lam / gamma) [alpha/c + (b / alpha^n)(1/c + 2/(beta phi))] (b#/c#) (alpha/alpha#)^n``."""
    a, g, b, c = t.alpha, t.gamma, ecert.b, ecert.c
    x = 1.0 / c + 2.0 / _beta_phi(phi)
    with np.errstate(over="ignore", under="ignore"):
        lead = b * x * float(np.power(a, -float(n)))
        decay = float(np.power(a / t.alpha_sharp, float(n)))
    return (4.0 * p.lam / g) * (a / c + lead) * (sharp.b / sharp.c) * decay


def log10_bound_sharp(p: RetrialParams, t: RetrialTuning, ecert: ExponentialCertificate,
                      sharp: SharpCertificate, phi, n: int) -> float:
    """``log10`` of :func:`retrial_bound_sharp`, finite far past double-precision underflow."""
    a, g, b, c = t.alpha, t.gamma, ecert.b, ecert.c
    x = 1.0 / c + 2.0 / _beta_phi(phi)
    # a^-n may underflow to zero here, which only drops a vanishing term
    with np.errstate(under="ignore"):
        mid = a / c + b * x * float(np.power(a, -float(n)))
    return float(np.log10(4.0 * p.lam / g) + np.log10(mid) + np.log10(sharp.b / sharp.c)
                 + n * np.log10(a / t.alpha_sharp))


@dataclass
class ErrorCurve:
    kind: str
    points: list
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown curve kind {self.kind!r}")

    @property
    def ns(self) -> np.ndarray:
        return np.array([n for n, _ in self.points])

    @property
    def values(self) -> np.ndarray:
        return np.array([v for _, v in self.points])

    def dominated_by(self, other: "ErrorCurve", rtol: float = 1e-12) -> bool:
        """Pointwise ``self <= other`` on the shared n-grid."""
        mine = dict(self.points)
        return all(mine[n] <= v * (1 + rtol) for n, v in other.points if n in mine)

    def rows(self):
        for n, v in self.points:
            yield {"n": n, "kind": self.kind, "value": v,
                   "beta": self.config.get("beta"), "K": self.config.get("K"),
                   "N": self.config.get("N")}

    def to_csv(self, path) -> None:
        write_curves_csv([self], path)


def write_curves_csv(curves: Iterable[ErrorCurve], path) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "kind", "value", "beta", "K", "N"])
        for cv in curves:
            for r in cv.rows():
                w.writerow([r["n"], r["kind"], f"{r['value']:.6e}", _fmt(r["beta"]), r["K"], r["N"]])


def _fmt(x):
    return "" if x is None else f"{x:.6e}"


def exp_curve(kind: str, Q: BlockGenerator, ecert: ExponentialCertificate, phi, ns,
              sharp: Optional[SharpCertificate] = None, params: Optional[RetrialParams] = None,
              tuning: Optional[RetrialTuning] = None) -> ErrorCurve:
    """Evaluate an exponential-case bound over an n-grid, re-solving ``npi`` per n."""
    ns = [int(n) for n in ns]
    if not ns:
        raise DomainError("empty n grid")
    if min(ns) < 1:
        raise DomainError("n must be >= 1")
    pts = []
    for n in ns:
        if kind == "EN_sharp":
            val = EN_sharp(ecert, sharp, phi, n)
        elif kind == "retrial_sharp":
            val = retrial_bound_sharp(params, tuning, ecert, sharp, phi, n)
        else:
            npi = solve_stationary(Q, n, params)
            if kind == "EN":
                val = EN(Q, ecert, phi, npi)
            elif kind == "EN_plus":
                val = EN_plus(Q, ecert, phi, npi)
            elif kind == "ldqbd":
                val = ldqbd_bound(Q, ecert, phi, npi)
            elif kind == "retrial_1":
                val = retrial_bound_1(params, tuning, ecert, phi, npi)
            else:
                raise DomainError(f"curve kind {kind!r} is not an exponential-case bound")
        pts.append((n, float(val)))
    cfg = {"beta": getattr(phi, "beta", None), "K": getattr(phi, "K", None), "N": getattr(phi, "N", None),
           "certificate": ecert.meta.get("kind")}
    return ErrorCurve(kind, pts, cfg)


def build_hat_generator(Q: BlockGenerator, cert: DriftCertificate, C_fv: Optional[float] = None,
                        levels: int = 200):
    """``Q_hat = diag(v/f) Q`` and ``b_hat = b max_{F_K} v/f``.

    Returns ``(Q_hat, b_hat, hat_cert)`` where ``hat_cert`` witnesses
    ``Q_hat v <= -v + b_hat 1_{F_K}``.  ``C_fv`` (``sup f/v``) is checked on the
    sampled prefix when supplied.
    """
    for k in range(levels + 1):
        vk = np.asarray(cert.v(k), dtype=float)
        if np.any(vk <= 0):
            raise DomainError(f"v vanishes on level {k}")
        if C_fv is not None and np.any(np.asarray(cert.f(k)) / vk > C_fv * (1 + 1e-12)):
            raise DomainError(f"f/v exceeds C_fv={C_fv} on level {k}")

    def ratio(k):
        return np.asarray(cert.v(k), dtype=float) / np.asarray(cert.f(k), dtype=float)

    b_hat = cert.b * max(float(ratio(k).max()) for k in range(cert.K + 1))
    Qh = Q.scale_rows(ratio, name=f"hat({Q.name})")
    hat_cert = ExponentialCertificate(b_hat, 1.0, cert.K, cert.v, {"derived_from": cert.meta.get("kind")})
    return Qh, b_hat, hat_cert


def reduction_bounds(E_hat: float, b: float, b_hat: float, C_fv: float,
                     monotone_v: bool = False) -> tuple[float, float]:
    """``(2 E_hat, E_hat [1 + (1 + E_hat) / ((1 - min(E_hat, 1)) v (b_hat C_fv)^-1)])``.

    With ``monotone_v`` the bracketed fraction is additionally capped at ``b``.
    """
    if E_hat < 0:
        raise DomainError("E_hat must be nonnegative")
    if E_hat == 0:
        return 0.0, 0.0
    denom = max(1.0 - min(E_hat, 1.0), 1.0 / (b_hat * C_fv))
    frac = (1.0 + E_hat) / denom
    if monotone_v:
        frac = min(frac, b)
    return 2.0 * E_hat, E_hat * (1.0 + frac)
