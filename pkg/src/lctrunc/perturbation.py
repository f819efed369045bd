"""v-norms and computable bounds on ``||pi* - pi||`` for perturbed generators."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .certificates import DriftCertificate, ExponentialCertificate
from .errors import DomainError, InfeasibleError
from .generator import BlockGenerator, LevelLayout


@dataclass(frozen=True)
class VNorm:
    """Weighted norms with weight provider ``v(k) -> phase vector``."""

    v: object
    layout: LevelLayout

    def weights(self, n: int) -> np.ndarray:
        w = np.concatenate([np.asarray(self.v(k), dtype=float) for k in range(n + 1)])
        if np.any(w <= 0):
            raise DomainError("v-norm weights must be positive")
        return w

    def vector(self, x) -> float:
        """``sum |x| v`` for a flat vector on levels ``0..n``."""
        x = np.asarray(x, dtype=float)
        n, rem = divmod(x.size - self.layout.s0, self.layout.s1)
        if rem or n < 0:
            raise DomainError(f"vector of length {x.size} does not fit the layout")
        return float(np.abs(x) @ self.weights(n))

    def matrix(self, Z: BlockGenerator, levels: int, exact_beyond: Optional[int] = None) -> "VNormResult":
        return v_norm_matrix(Z, self.v, levels, exact_beyond)


@dataclass(frozen=True)
class VNormResult:
    value: float
    worst_state: tuple
    levels: int
    path: str  # "closed-form" or "sampled"
    lower_estimate: bool

    def __float__(self):
        return self.value


def v_norm_matrix(Z: BlockGenerator, v, levels: int, exact_beyond: Optional[int] = None) -> VNormResult:
    """``sup_rows sum_j |z_ij| v_j / v_i`` over levels ``0..levels``.

    ``exact_beyond = k0`` declares that the row ratios no longer change past
    level ``k0`` (level-independent banded ``Z`` with geometric ``v``); the
    sampled sup is then the true sup once ``levels > k0 + bandwidth``.
    Otherwise the value is only a lower estimate of the infinite-space norm.
    """
    best, where = 0.0, (0, 0)
    for k in range(levels + 1):
        vk = np.asarray(v(k), dtype=float)
        if np.any(vk <= 0):
            raise DomainError(f"v must be positive; level {k} has a nonpositive entry")
        acc = np.zeros_like(vk)
        for l in Z.column_range(k):
            blk = Z.block(k, l)
            if np.any(blk):
                acc += np.abs(blk) @ np.asarray(v(l), dtype=float)
        ratio = acc / vk
        i = int(np.argmax(ratio))
        if ratio[i] > best:
            best, where = float(ratio[i]), (k, i)
    exact = exact_beyond is not None and levels > exact_beyond + max(Z.upper_bandwidth, Z.lower_bandwidth or 0)
    return VNormResult(best, where, levels, "closed-form" if exact else "sampled", not exact)


def C_constant(ecert: ExponentialCertificate, phi) -> float:
    """``((b+1)/c) (1 + b + 2bc / (beta phi))``."""
    b, c = ecert.b, ecert.c
    bp = _beta_phi(phi)
    return (b + 1) / c * (1 + b + 2 * b * c / bp)


def C_hat_constant(b_hat: float, hat_phi) -> float:
    """``(b_hat + 1) (1 + b_hat + 2 b_hat / (beta phi_hat))``."""
    return (b_hat + 1) * (1 + b_hat + 2 * b_hat / _beta_phi(hat_phi))


def _beta_phi(phi) -> float:
    if hasattr(phi, "phi_bar"):
        if phi.phi_bar <= 0:
            raise DomainError("phi-bar is not positive; increase N")
        return phi.beta * phi.phi_bar
    return float(phi)


def _ratio_bound(C, delta):
    if delta < 0:
        raise DomainError("norm of the perturbation must be nonnegative")
    if C * delta >= 1:
        raise InfeasibleError(f"C * delta = {C * delta:.6g} >= 1; the bound does not apply")
    return C * delta / (1 - C * delta)


def perturbation_bound_exp(ecert: ExponentialCertificate, phi, norm_delta: float) -> float:
    """``(b/c) C delta / (1 - C delta)``, a bound on ``||pi* - pi||_v``."""
    return ecert.b / ecert.c * _ratio_bound(C_constant(ecert, phi), float(norm_delta))


def perturbation_bound_general(cert: DriftCertificate, C_fv: float, b_hat: float, hat_phi,
                               norm_delta_hat: float) -> float:
    """``C_fv (1 + b_hat C_fv) b_hat C_hat delta / (1 - C_hat delta)``, a bound on ``||pi* - pi||_f``."""
    Ch = C_hat_constant(b_hat, hat_phi)
    return C_fv * (1 + b_hat * C_fv) * b_hat * _ratio_bound(Ch, float(norm_delta_hat))


@dataclass
class PerturbationReport:
    norm_delta: float
    C: float
    bound: Optional[float]
    norm_path: str = "sampled"
    feasible: bool = True

    @classmethod
    def exp(cls, ecert: ExponentialCertificate, phi, norm: VNormResult | float) -> "PerturbationReport":
        delta = float(norm)
        C = C_constant(ecert, phi)
        path = getattr(norm, "path", "given")
        try:
            bound = perturbation_bound_exp(ecert, phi, delta)
        except InfeasibleError:
            return cls(delta, C, None, path, False)
        return cls(delta, C, bound, path, True)

    def to_json(self) -> dict:
        d = asdict(self)
        d["C_times_delta"] = self.C * self.norm_delta
        return d
