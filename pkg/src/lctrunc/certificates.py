"""Drift certificates and their closed forms for the retrial queue.

A certificate ``(b, K, v, f)`` witnesses ``Qv <= -f + b 1_{F_K}``.  The
exponential case has ``f = c v``.  ``v`` and ``f`` are callables returning
the phase vector of a level, so bounds can evaluate them at any level.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError
from .generator import BlockGenerator
from .models import RetrialParams

DEFAULT_ALPHA = 1.0 + 1e-3
DEFAULT_SHARP_INDEX = 99


class MonotonicityWarning(UserWarning):
    """v is not level-wise nondecreasing on the sampled prefix."""


@dataclass(frozen=True)
class DriftCertificate:
    """``Qv <= -f + b 1_{F_K}`` with ``f >= e``."""

    b: float
    K: int
    v: Callable[[int], np.ndarray]
    f: Callable[[int], np.ndarray]
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.b > 0:
            raise DomainError(f"b must be positive, got {self.b}")
        if self.K < 0:
            raise DomainError("K must be >= 0")

    def to_json(self) -> dict:
        if "kind" not in self.meta:
            raise DomainError("only closed-form certificates serialize to JSON")
        return dict(self.meta)


@dataclass(frozen=True)
class ExponentialCertificate:
    """``Qv <= -c v + b 1_{F_K}`` with ``c v >= e``; implies ``pi v <= b / c``."""

    b: float
    c: float
    K: int
    v: Callable[[int], np.ndarray]
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not (self.b > 0 and self.c > 0):
            raise DomainError(f"b and c must be positive, got b={self.b}, c={self.c}")
        if self.K < 0:
            raise DomainError("K must be >= 0")

    def f(self, k: int) -> np.ndarray:
        return self.c * self.v(k)

    @property
    def pi_v_bound(self) -> float:
        return self.b / self.c

    def as_drift(self) -> DriftCertificate:
        return DriftCertificate(self.b, self.K, self.v, self.f, self.meta)

    def to_json(self) -> dict:
        if "kind" not in self.meta:
            raise DomainError("only closed-form certificates serialize to JSON")
        return dict(self.meta)


@dataclass(frozen=True)
class SharpCertificate:
    """Second drift solution plus the scalar functions used by the sharp bound.

    ``v``/``f`` here are ``v#``/``f#`` with ``Q v# <= -f# + b# 1_{F_K#}``;
    ``V`` and ``T`` are nondecreasing, log-subadditive and unbounded;
    ``a`` is the phase vector with ``v(k) <= V(k) a`` for the base certificate.
    """

    b: float
    c: float
    K: int
    v: Callable[[int], np.ndarray]
    f: Callable[[int], np.ndarray]
    V: Callable[[float], float]
    T: Callable[[float], float]
    a: np.ndarray
    r0: float
    r1: float
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def a_min(self) -> float:
        return float(np.min(self.a))

    def check(self, grid=range(0, 201)) -> list[str]:
        """Violations of the scalar-function conditions on a sampled grid."""
        problems = []
        xs = list(grid)
        for name, fn in (("V", self.V), ("T", self.T)):
            vals = np.array([fn(x) for x in xs])
            if np.any(vals < 1.0 - 1e-15):
                problems.append(f"{name} < 1 somewhere on the grid")
            if np.any(np.diff(vals) < -1e-15 * vals[1:]):
                problems.append(f"{name} is not nondecreasing")
            for x in xs[::10]:
                for y in xs[::10]:
                    if fn(x + y) > fn(x) * fn(y) * (1 + 1e-12):
                        problems.append(f"{name} is not log-subadditive at ({x}, {y})")
                        break
            if fn(xs[-1]) <= fn(xs[0]):
                problems.append(f"{name} does not grow on the grid")
        if np.any(np.asarray(self.a) <= 0):
            problems.append("a must be positive")
        return problems

    def to_json(self) -> dict:
        if "kind" not in self.meta:
            raise DomainError("only closed-form certificates serialize to JSON")
        return dict(self.meta)


def retrial_default_gamma(alpha: float, rho: float) -> float:
    """Midpoint of the admissible interval ``(1/alpha, 1 - rho (alpha - 1))``."""
    if not (0 < rho < 1):
        raise DomainError(f"rho must lie in (0, 1), got {rho}")
    if not (1 < alpha < 1 / rho):
        raise DomainError(f"alpha must lie in (1, 1/rho) = (1, {1 / rho:.6g}), got {alpha}")
    return 0.5 * (1 / alpha + 1 - rho * (alpha - 1))


def sharp_alpha(alpha: float, rho: float, index: int = DEFAULT_SHARP_INDEX) -> float:
    """``alpha + (index / 100) (1/rho - alpha)``."""
    if not 0 < index < 100:
        raise DomainError("index must lie in 1..99")
    return alpha + (index / 100.0) * (1 / rho - alpha)


@dataclass(frozen=True)
class RetrialTuning:
    alpha: float
    gamma: float
    alpha_sharp: float
    gamma_sharp: float

    @classmethod
    def default(cls, rho: float, alpha: float = DEFAULT_ALPHA,
                sharp_index: int = DEFAULT_SHARP_INDEX) -> "RetrialTuning":
        a_sh = sharp_alpha(alpha, rho, sharp_index)
        return cls(alpha, retrial_default_gamma(alpha, rho), a_sh, retrial_default_gamma(a_sh, rho))

    def validate(self, rho: float, sharp: bool = True) -> None:
        _check_pair(self.alpha, self.gamma, rho, "")
        if sharp:
            if not self.alpha < self.alpha_sharp:
                raise DomainError("alpha_sharp must exceed alpha")
            _check_pair(self.alpha_sharp, self.gamma_sharp, rho, "_sharp")


def _check_pair(alpha, gamma, rho, tag):
    if not (0 < rho < 1):
        raise DomainError(f"rho must lie in (0, 1), got {rho}")
    if not (1 < alpha < 1 / rho):
        raise DomainError(f"alpha{tag}={alpha} outside (1, 1/rho) = (1, {1 / rho:.6g})")
    lo, hi = 1 / alpha, 1 - rho * (alpha - 1)
    if not (lo < gamma < hi):
        raise DomainError(f"gamma{tag}={gamma} outside ({lo:.12g}, {hi:.12g})")


def _retrial_constants(p: RetrialParams, alpha: float, gamma: float):
    # c, K and the bracket g(k) whose positive part scaled by alpha^k gives b
    s, lam, mu, eta = p.s, p.lam, p.mu, p.eta
    c = s * mu * (1 - p.rho * (alpha - 1) - gamma)
    slope = eta * (1 - 1 / (gamma * alpha))
    K = max(math.ceil((c + lam * (1 / gamma - 1)) / slope), 1) - 1

    def bracket(k):
        return c - (k * slope + lam * (1 - 1 / gamma))

    best = max(alpha ** k * bracket(k) for k in range(K + 1))
    return c, K, max(best, 0.0)


def _phase_weights(s, gamma):
    w = np.ones(s + 1)
    w[s] = 1.0 / gamma
    return w


def retrial_certificate(p: RetrialParams, t: Optional[RetrialTuning] = None) -> ExponentialCertificate:
    """Closed-form exponential certificate ``v(k) = alpha^k a`` for the retrial queue."""
    p.require_stable()
    if t is None:
        t = RetrialTuning.default(p.rho)
    t.validate(p.rho, sharp=False)
    alpha, gamma = t.alpha, t.gamma
    c, K, b_acute = _retrial_constants(p, alpha, gamma)
    a = _phase_weights(p.s, gamma) / c

    def v(k):
        return alpha ** k * a

    meta = {"kind": "retrial_exp", "alpha": alpha, "gamma": gamma,
            "s": p.s, "lambda": p.lam, "mu": p.mu, "eta": p.eta}
    return ExponentialCertificate(b_acute / c, c, K, v, meta)


def _power(base):
    base = np.float64(base)

    def fn(x):
        # overflow to inf rather than raising; the bounds divide by these
        with np.errstate(over="ignore"):
            return float(base ** np.float64(x))
    return fn


def retrial_sharp_certificate(p: RetrialParams, t: Optional[RetrialTuning] = None) -> SharpCertificate:
    """Second certificate at ``(alpha#, gamma#)`` with ``V = alpha^x``, ``T = (alpha#/alpha)^x``."""
    p.require_stable()
    if t is None:
        t = RetrialTuning.default(p.rho)
    t.validate(p.rho, sharp=True)
    alpha, gamma = t.alpha, t.gamma
    a_sh, g_sh = t.alpha_sharp, t.gamma_sharp
    c = p.s * p.mu * (1 - p.rho * (alpha - 1) - gamma)
    c_sh, K_sh, b_sh = _retrial_constants(p, a_sh, g_sh)
    w_sh = _phase_weights(p.s, g_sh)
    ratio = a_sh / alpha

    def v(k):
        return a_sh ** k * w_sh

    def f(k):
        return c_sh * v(k)

    meta = {"kind": "retrial_sharp", "alpha": alpha, "gamma": gamma,
            "alpha_sharp": a_sh, "gamma_sharp": g_sh,
            "s": p.s, "lambda": p.lam, "mu": p.mu, "eta": p.eta}
    return SharpCertificate(
        b=b_sh, c=c_sh, K=K_sh, v=v, f=f,
        V=_power(alpha), T=_power(ratio),
        a=_phase_weights(p.s, gamma) / c,
        r0=1.0 / c_sh, r1=alpha * p.lam / (c * gamma), meta=meta,
    )


def mm1_certificate(lam: float, mu: float, alpha: float) -> ExponentialCertificate:
    """``v(k) = alpha^k / c`` for the M/M/1 queue, ``1 < alpha < mu / lam``."""
    if not (1 < alpha < mu / lam):
        raise DomainError(f"alpha must lie in (1, mu/lam) = (1, {mu / lam:.6g})")
    c = (alpha - 1) * (mu / alpha - lam)
    b = lam * (alpha - 1) / c + 1.0

    def v(k):
        return np.array([alpha ** k / c])

    meta = {"kind": "mm1_exp", "lambda": lam, "mu": mu, "alpha": alpha}
    return ExponentialCertificate(b, c, 0, v, meta)


def certificate_from_json(d: dict):
    """Rebuild a closed-form certificate from its JSON tag."""
    kind = d.get("kind")
    if kind in ("retrial_exp", "retrial_sharp"):
        p = RetrialParams(int(d["s"]), float(d["lambda"]), float(d["mu"]), float(d["eta"]))
        if kind == "retrial_exp":
            gamma = d.get("gamma", retrial_default_gamma(d["alpha"], p.rho))
            t = RetrialTuning(d["alpha"], gamma, float("nan"), float("nan"))
            return retrial_certificate(p, t)
        t = RetrialTuning(d["alpha"], d["gamma"], d["alpha_sharp"], d["gamma_sharp"])
        return retrial_sharp_certificate(p, t)
    if kind == "mm1_exp":
        return mm1_certificate(d["lambda"], d["mu"], d["alpha"])
    raise DomainError(f"unknown certificate kind {kind!r}")


@dataclass
class DriftReport:
    passed: bool
    worst_margin: float
    worst_state: tuple[int, int]
    level_margins: np.ndarray
    levels: int
    tol: float
    note: str = ("finite-prefix check only: a pass is evidence on levels 0..levels, "
                 "not a proof for the infinite chain")

    def summary(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return (f"{status}: worst scaled margin {self.worst_margin:.3e} at {self.worst_state} "
                f"(levels 0..{self.levels}, tol {self.tol:g}); {self.note}")


def drift_margins(Q: BlockGenerator, v, f, b: float, K: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Raw margin ``(Qv)(k) + f(k) - b 1{k <= K}`` and the row scale ``sum |q| v``.

    ``Qv`` is evaluated as ``sum_j q_ij (v_j - v_i) + (row sum) v_i``, which
    avoids the cancellation between the diagonal and off-diagonal terms.
    """
    vk = np.asarray(v(k), dtype=float)
    qv = np.zeros_like(vk)
    rowsum = np.zeros_like(vk)
    scale = np.zeros_like(vk)
    for l in Q.column_range(k):
        blk = Q.block(k, l)
        vl = vk if l == k else np.asarray(v(l), dtype=float)
        off = blk - np.diag(np.diag(blk)) if l == k else blk
        qv += off @ vl - off.sum(axis=1) * vk
        rowsum += blk.sum(axis=1)
        scale += np.abs(blk) @ vl
    qv += rowsum * vk
    margin = qv + np.asarray(f(k), dtype=float) - (b if k <= K else 0.0)
    return margin, scale


def verify_drift(Q: BlockGenerator, cert, levels: int, tol: float = 1e-9) -> DriftReport:
    """Check the drift inequality on levels ``0..levels``.

    A state passes when its margin is ``<= tol * max(1, sum_j |q_ij| v_j)``;
    the reported margins are divided by that same scale.
    """
    if isinstance(cert, ExponentialCertificate):
        cert = cert.as_drift()
    if levels < cert.K + 2:
        raise DomainError(f"levels must be >= K + 2 = {cert.K + 2}")
    worst = -np.inf
    worst_state = (0, 0)
    per_level = np.empty(levels + 1)
    for k in range(levels + 1):
        margin, scale = drift_margins(Q, cert.v, cert.f, cert.b, cert.K, k)
        scaled = margin / np.maximum(scale, 1.0)
        i = int(np.argmax(scaled))
        per_level[k] = scaled[i]
        if scaled[i] > worst:
            worst, worst_state = float(scaled[i]), (k, i)
    return DriftReport(worst <= tol, worst, worst_state, per_level, levels, tol)


def check_monotone(v, levels: int = 50) -> bool:
    """Whether ``v`` restricted to levels ``>= 1`` is level-wise nondecreasing on a prefix."""
    ok = all(np.all(np.asarray(v(k + 1)) >= np.asarray(v(k))) for k in range(1, levels))
    if not ok:
        warnings.warn("v is not level-wise nondecreasing above level 0", MonotonicityWarning, stacklevel=2)
    return ok


def pi_f_upper(cert, levels: int = 50) -> float:
    """``b``: a bound on ``pi f`` and on every ``n_pi f`` when ``v`` is level-wise nondecreasing.

    Warns (but still returns ``b``) if the sampled prefix breaks monotonicity,
    since the truncated-chain half of the bound then has no guarantee.
    """
    check_monotone(cert.v, levels)
    return float(cert.b)


def pi_v_upper(cert: ExponentialCertificate) -> float:
    """``b / c``, the bound on ``pi v`` implied by an exponential certificate."""
    return cert.pi_v_bound
