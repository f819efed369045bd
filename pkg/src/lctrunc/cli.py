"""Command-line front end: solvers, bounds, tables and figure data.

Exit status is 0 on success, 1 when a validation suite reports a failed
inequality, 2 when a precondition is infeasible (unstable model, C delta >= 1,
no valid N, bad domain) and 3 on a numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import __version__
from .bounds import (KINDS, EN, EN_plus, exp_curve, log10_bound_sharp, retrial_bound_1, retrial_bound_sharp,
                     write_curves_csv)
from .certificates import (DEFAULT_ALPHA, DEFAULT_SHARP_INDEX, RetrialTuning, certificate_from_json,
                           mm1_certificate, retrial_certificate, retrial_default_gamma,
                           retrial_sharp_certificate, verify_drift)
from .errors import (DomainError, InfeasibleError, LCTruncError, NonConvergenceError, NotFoundError,
                     SingularityError, StructureError, TailMassError)
from .generator import generator_difference, validate_qmatrix
from .models import RetrialParams, model_from_descriptor, retrial_generator
from .perturbation import PerturbationReport, v_norm_matrix
from .resolvent import DEFAULT_N_OFFSET, resolvent_summary
from .stationary import reference_stationary, solve_stationary

EXIT_OK, EXIT_FAILED, EXIT_INFEASIBLE, EXIT_NUMERIC = 0, 1, 2, 3

TABLE_RHOS = (0.1, 0.5, 0.9, 0.95, 0.99)
TABLE_OFFSETS = (10, 50, 100, 500)
BETA_RULES = ("(1-rho)^0.5", "1-rho", "(1-rho)^2", "(1-rho)^3")
FIG4_LINES = (1, 10, 50, 90, 99)
# below this the double-precision reference cannot resolve |pi - npi| e
ERROR_FLOOR = 1e-15


# ---------------------------------------------------------------- parsing

def sci(x) -> str:
    """Six significant digits, scientific notation."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.5e}"


def parse_beta(text: str) -> Callable[[Optional[float]], float]:
    """``"0.5"``, ``"1-rho"``, ``"(1-rho)^p"`` or ``"sqrt(1-rho)"`` as a function of rho."""
    t = text.replace(" ", "").lower()
    if t in ("1-rho", "one_minus_rho"):
        power = 1.0
    elif t == "sqrt(1-rho)":
        power = 0.5
    elif t.startswith("(1-rho)^") or t.startswith("(1-rho)**"):
        power = float(t.split("^")[-1] if "^" in t else t.split("**")[-1])
    else:
        try:
            value = float(t)
        except ValueError:
            raise argparse.ArgumentTypeError(f"cannot read beta rule {text!r}") from None
        if not value > 0:
            raise argparse.ArgumentTypeError("beta must be positive")
        return lambda rho: value

    def rule(rho):
        if rho is None:
            raise DomainError(f"beta rule {text!r} needs a traffic intensity")
        return (1.0 - rho) ** power
    return rule


def parse_grid(text: str) -> list[int]:
    """Integer grid from ``"1..300"``, ``"1..300:5"`` or ``"10,20,50..60"``."""
    out: list[int] = []
    for part in filter(None, (p.strip() for p in text.split(","))):
        if ".." in part:
            span, _, step = part.partition(":")
            lo, hi = (int(x) for x in span.split(".."))
            out.extend(range(lo, hi + 1, int(step) if step else 1))
        else:
            out.append(int(part))
    if not out:
        raise DomainError("empty n grid")
    return out


def parse_floats(text: str) -> list[float]:
    vals = [float(x) for x in text.split(",") if x.strip()]
    if not vals:
        raise DomainError("empty grid")
    return vals


# ---------------------------------------------------------------- output

def _to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)) or obj is None:
        return bool(obj) if obj is not None else None
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _Num(float(obj))
    return str(obj)


class _Num(float):
    pass


def dumps(obj) -> str:
    """JSON with floats in 6-digit scientific notation (non-finite as strings)."""
    def enc(o, ind=0):
        pad = "  " * (ind + 1)
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = [f'{pad}{json.dumps(k)}: {enc(v, ind + 1)}' for k, v in o.items()]
            return "{\n" + ",\n".join(items) + "\n" + "  " * ind + "}"
        if isinstance(o, list):
            return "[" + ", ".join(enc(v, ind + 1) for v in o) + "]"
        if isinstance(o, _Num):
            return sci(o) if math.isfinite(o) else json.dumps(sci(o))
        return json.dumps(o)
    return enc(_to_jsonable(obj))


class Sink:
    """Serialized writer to a file or stdout."""

    def __init__(self, path: Optional[str]):
        self.path = path

    def text(self, s: str) -> None:
        if self.path:
            Path(self.path).write_text(s if s.endswith("\n") else s + "\n")
        else:
            sys.stdout.write(s if s.endswith("\n") else s + "\n")

    def rows(self, header, rows) -> None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([sci(x) if isinstance(x, (float, np.floating)) else x for x in r])
        self.text(buf.getvalue())


# ---------------------------------------------------------------- model plumbing

@dataclass
class Model:
    Q: object
    params: Optional[RetrialParams]
    desc: dict

    @property
    def rho(self) -> Optional[float]:
        if self.params is not None:
            return self.params.rho
        if self.desc.get("model") == "mm1":
            return float(self.desc["lambda"]) / float(self.desc["mu"])
        return None


def _read_desc(path: Optional[str]) -> tuple[dict, Optional[Path]]:
    if path is None:
        return {"model": "retrial", "s": 50, "mu": 1.0}, None
    p = Path(path)
    return json.loads(p.read_text()), p.parent


def build_model(args, rho: Optional[float] = None) -> Model:
    desc, base = _read_desc(args.model)
    if rho is not None:
        if desc.get("model") != "retrial":
            raise DomainError("--rho applies only to retrial models")
        desc = {k: v for k, v in desc.items() if k != "lambda"} | {"rho": rho}
    Q, params = model_from_descriptor(desc, base)
    return Model(Q, params, desc)


def exp_certificate(model: Model, args):
    """Exponential certificate from the closed forms or a ``--certificate`` file."""
    if getattr(args, "certificate", None):
        return certificate_from_json(json.loads(Path(args.certificate).read_text())), None
    alpha = args.alpha
    if model.params is not None:
        t = RetrialTuning.default(model.params.rho, alpha, args.sharp_index)
        return retrial_certificate(model.params, t), t
    if model.desc.get("model") == "mm1":
        lam, mu = float(model.desc["lambda"]), float(model.desc["mu"])
        return mm1_certificate(lam, mu, alpha), None
    raise DomainError("no closed-form certificate for this model; pass --certificate")


def beta_for(args, rho):
    rule = args.beta if args.beta is not None else parse_beta("1-rho" if rho is not None else "1")
    return rule(rho)


def phi_for(model: Model, K: int, beta: float, args, N: Optional[int] = None):
    if N is None:
        N = K + args.n_offset
    return resolvent_summary(model.Q, K, N, beta, threads=args.threads)


# ---------------------------------------------------------------- commands

def cmd_validate(args, out: Sink) -> int:
    model = build_model(args, args.rho)
    rep = validate_qmatrix(model.Q, args.levels)
    lines = [f"generator {model.Q.name}: {rep.summary()}"]
    ok = rep.passed
    if model.params is not None and not model.params.stable:
        lines.append(f"unstable: rho = {sci(model.params.rho)} >= 1")
        out.text("\n".join(lines))
        return EXIT_INFEASIBLE
    try:
        ecert, _ = exp_certificate(model, args)
    except DomainError as exc:
        lines.append(f"drift: skipped ({exc})")
    else:
        drep = verify_drift(model.Q, ecert, max(args.levels, ecert.K + 2))
        lines.append(f"drift (b={sci(ecert.b)}, c={sci(ecert.c)}, K={ecert.K}): {drep.summary()}")
        ok = ok and drep.passed
    out.text("\n".join(lines))
    return EXIT_OK if ok else EXIT_INFEASIBLE


def cmd_solve(args, out: Sink) -> int:
    model = build_model(args, args.rho)
    res = solve_stationary(model.Q, args.n, model.params)
    out.rows(["level", "phase", "probability"], res.rows())
    return EXIT_OK


def _resolve_K(model, args):
    if args.K != "auto":
        return int(args.K)
    ecert, _ = exp_certificate(model, args)
    return ecert.K


def cmd_phi(args, out: Sink) -> int:
    model = build_model(args, args.rho)
    K = _resolve_K(model, args)
    beta = beta_for(args, model.rho)
    ph = phi_for(model, K, beta, args)
    out.text(dumps({"K": ph.K, "N": ph.N, "beta": ph.beta, "phi_bar": ph.phi_bar,
                    "one_over_beta_phi": ph.one_over_beta_phi, "corner_positive": ph.positive,
                    "argmax_state": list(ph.argmax_state)}))
    return EXIT_OK


def cmd_bounds(args, out: Sink) -> int:
    model = build_model(args, args.rho)
    kinds = [k.strip() for k in args.kind.split(",") if k.strip()]
    for k in kinds:
        if k not in KINDS:
            raise DomainError(f"unknown kind {k!r}; choose from {', '.join(KINDS)}")
    ns = parse_grid(args.n)
    ecert, tuning = exp_certificate(model, args)
    beta = beta_for(args, model.rho)
    ph = phi_for(model, ecert.K, beta, args)
    sharp = None
    if any(k in ("EN_sharp", "retrial_sharp") for k in kinds):
        if model.params is None:
            raise DomainError("sharp bounds need the retrial model")
        sharp = retrial_sharp_certificate(model.params, tuning)
    curves = [exp_curve(k, model.Q, ecert, ph, ns, sharp, model.params, tuning) for k in kinds]
    path = args.csv or args.out
    if path:
        write_curves_csv(curves, path)
    else:
        rows = [[r["n"], r["kind"], r["value"], r["beta"], r["K"], r["N"]] for cv in curves for r in cv.rows()]
        out.rows(["n", "kind", "value", "beta", "K", "N"], rows)
    return EXIT_OK


def _level_independent(a: Model, b: Model) -> Optional[int]:
    # the difference of two such models repeats its blocks from level 1 on
    if a.params is not None and b.params is not None and a.params.s == b.params.s \
            and a.params.eta == b.params.eta:
        return 1
    if a.desc.get("model") == b.desc.get("model") == "mm1":
        return 1
    return None


def cmd_perturb(args, out: Sink) -> int:
    model = build_model(args)
    desc, base = _read_desc(args.model_star)
    Qs, ps = model_from_descriptor(desc, base)
    star = Model(Qs, ps, desc)
    ecert, _ = exp_certificate(model, args)
    beta = beta_for(args, model.rho)
    ph = phi_for(model, ecert.K, beta, args)
    Z = generator_difference(star.Q, model.Q)
    norm = v_norm_matrix(Z, ecert.v, args.levels, _level_independent(model, star))
    rep = PerturbationReport.exp(ecert, ph, norm)
    d = rep.to_json() | {"K": ph.K, "N": ph.N, "beta": beta, "phi_bar": ph.phi_bar,
                         "worst_state": list(norm.worst_state), "levels": norm.levels}
    out.text(dumps(d))
    return EXIT_OK if rep.feasible else EXIT_INFEASIBLE


def _table_base(args):
    desc, _ = _read_desc(args.model)
    if desc.get("model") != "retrial":
        raise DomainError("tables are defined for the retrial model")
    return desc


def _retrial_at(args, rho, alpha=None):
    model = build_model(args, rho)
    model.params.require_stable()
    t = RetrialTuning.default(rho, alpha if alpha is not None else args.alpha, args.sharp_index)
    return model, t, retrial_certificate(model.params, t)


def cmd_table_kphi(args, out: Sink) -> int:
    _table_base(args)
    rhos = parse_floats(args.rhos) if args.rhos else list(TABLE_RHOS)
    offsets = parse_grid(args.offsets)
    header = ["rho", "K"] + [f"phi_bar_N=K+{o}" for o in offsets]
    rows = []
    for rho in rhos:
        model, _, ecert = _retrial_at(args, rho)
        beta = args.beta(rho) if args.beta is not None else 1.0
        vals = [phi_for(model, ecert.K, beta, args, ecert.K + o).phi_bar for o in offsets]
        rows.append([float(rho), ecert.K] + vals)
    out.rows(header, rows)
    return EXIT_OK


def cmd_table_beta(args, out: Sink) -> int:
    _table_base(args)
    rhos = parse_floats(args.rhos) if args.rhos else list(TABLE_RHOS)
    rules = [r.strip() for r in args.rules.split(",")] if args.rules else list(BETA_RULES)
    rows = []
    for rho in rhos:
        model, _, ecert = _retrial_at(args, rho)
        for r in rules:
            beta = parse_beta(r)(rho)
            ph = phi_for(model, ecert.K, beta, args)
            rows.append([float(rho), r, float(beta), ecert.K, ph.N, ph.phi_bar, ph.one_over_beta_phi])
    out.rows(["rho", "beta_rule", "beta", "K", "N", "phi_bar", "one_over_beta_phi"], rows)
    return EXIT_OK


def x_for_default_alpha(rho: float, alpha: float = DEFAULT_ALPHA) -> float:
    """``x`` with ``1 + x (1/rho - 1) = alpha``."""
    return (alpha - 1.0) / (1.0 / rho - 1.0)


def cmd_table_x(args, out: Sink) -> int:
    rhos = parse_floats(args.rhos) if args.rhos else list(TABLE_RHOS)
    out.rows(["rho", "x"], [[float(r), x_for_default_alpha(r, args.alpha)] for r in rhos])
    return EXIT_OK


def _sweep(points: int) -> np.ndarray:
    return np.arange(1, points + 1) / (points + 1)


def figure_rows(args, fig: int):
    """Rows ``(figure, rho, line, abscissa, value)`` for one figure setup."""
    _table_base(args)
    rhos = parse_floats(args.rhos) if args.rhos else list({4: (0.5,), 7: (0.99,)}.get(fig, TABLE_RHOS))
    rows = []
    if fig in (1, 2):
        beta_rule = args.beta or parse_beta("1")
        for rho in rhos:
            for x in _sweep(args.points):
                if fig == 1:
                    alpha = 1 + x * (1 / rho - 1)
                    model, t, ecert = _retrial_at(args, rho, alpha)
                    ph = phi_for(model, ecert.K, beta_rule(rho), args)
                    npi = solve_stationary(model.Q, 1, model.params)
                    val = retrial_bound_1(model.params, t, ecert, ph, npi)
                else:
                    model, t0, ecert = _retrial_at(args, rho)
                    a_sh = t0.alpha + x * (1 / rho - t0.alpha)
                    t = RetrialTuning(t0.alpha, t0.gamma, a_sh, retrial_default_gamma(a_sh, rho))
                    ph = phi_for(model, ecert.K, beta_rule(rho), args)
                    val = retrial_bound_sharp(model.params, t, ecert,
                                              retrial_sharp_certificate(model.params, t), ph, 1)
                rows.append([fig, float(rho), "0" if fig == 1 else "(0,x)", float(x), val, _log10_or_blank(val)])
        return rows
    if fig not in (4, 5, 6, 7):
        raise DomainError(f"no figure {fig}; choose 1, 2, 4, 5, 6 or 7")
    ns = parse_grid(args.n)
    for rho in rhos:
        beta = (args.beta or parse_beta("1-rho" if fig == 7 else "1"))(rho)
        model, t, ecert = _retrial_at(args, rho)
        ph = phi_for(model, ecert.K, beta, args)
        if fig in (4, 5, 7):
            cv = exp_curve("retrial_1", model.Q, ecert, ph, ns, params=model.params, tuning=t)
            rows += [[fig, float(rho), "0", n, v, _log10_or_blank(v)] for n, v in cv.points]
        js = FIG4_LINES if fig == 4 else (args.sharp_index,) if fig in (6, 7) else ()
        for j in js:
            tj = RetrialTuning.default(rho, t.alpha, j)
            sh = retrial_sharp_certificate(model.params, tj)
            rows += [[fig, float(rho), f"(0,{j})", n,
                      retrial_bound_sharp(model.params, tj, ecert, sh, ph, n),
                      log10_bound_sharp(model.params, tj, ecert, sh, ph, n)] for n in ns]
    return rows


def _log10_or_blank(v):
    # blank once the value has underflowed: its logarithm is no longer known
    return math.log10(v) if v > 0 and math.isfinite(v) else ""


def cmd_figure(args, out: Sink) -> int:
    out.rows(["figure", "rho", "line", "abscissa", "value", "log10_value"], figure_rows(args, args.id))
    return EXIT_OK


# ---------------------------------------------------------------- validation suite

@dataclass
class Check:
    name: str
    passed: Optional[bool]  # None marks an infeasible precondition
    detail: str

    def line(self) -> str:
        tag = {True: "PASS", False: "FAIL", None: "INFEASIBLE"}[self.passed]
        return f"{tag} {self.name}: {self.detail}"


def bound_suite(p: RetrialParams, ns, n_ref: int = 600, beta: Optional[float] = None,
                alpha: float = DEFAULT_ALPHA, n_offset: int = DEFAULT_N_OFFSET,
                phi_scale: float = 1.0, perturb_rel: float = 1e-4,
                perturb_alpha: float = 1.1, threads: int = 1) -> list[Check]:
    """Desk-scale checks of the stationary and bound inequalities for a retrial queue."""
    Q = retrial_generator(p)
    rho = p.rho
    beta = 1.0 - rho if beta is None else beta
    t = RetrialTuning.default(rho, alpha)
    ecert = retrial_certificate(p, t)
    sharp = retrial_sharp_certificate(p, t)
    checks = []

    drep = verify_drift(Q, ecert, ecert.K + 200)
    checks.append(Check("drift inequality on levels 0..K+200", drep.passed, drep.summary()))

    ph = resolvent_summary(Q, ecert.K, ecert.K + n_offset, beta, threads=threads)
    far = resolvent_summary(Q, ecert.K, ecert.K + n_offset + 200, beta, threads=threads)
    scaled = ph.phi_bar * phi_scale
    checks.append(Check("phi_bar(K,N) <= phi_bar(K,N+200)", scaled <= far.phi_bar * (1 + 1e-12),
                        f"{sci(scaled)} vs {sci(far.phi_bar)}"))
    phi_used = beta * scaled

    try:
        ref = reference_stationary(Q, n_ref, 1e-12, p)
    except TailMassError as exc:
        checks.append(Check("reference tail mass < 1e-12", False, str(exc)))
        return checks
    checks.append(Check("reference tail mass < 1e-12", True,
                        f"mass above level {n_ref - math.ceil(0.1 * (n_ref + 1)) + 1} "
                        f"is {sci(ref.mass_at_or_above(n_ref - math.ceil(0.1 * (n_ref + 1)) + 1))}"))

    cv = np.concatenate([ecert.c * ecert.v(k) for k in range(n_ref + 1)])
    pi_cv = float(ref.pi @ cv)
    bad = {"a_e": [], "a_cv": [], "b": [], "c": [], "d": []}
    for n in ns:
        npi = solve_stationary(Q, n, p)
        diff = np.abs(ref.pi - npi.padded(n_ref))
        e_tilde = retrial_bound_1(p, t, ecert, phi_used, npi)
        if diff.sum() > max(e_tilde, ERROR_FLOOR):
            bad["a_e"].append(n)
        if (diff @ cv) / pi_cv > max(e_tilde, ERROR_FLOOR):
            bad["a_cv"].append(n)
        if e_tilde > retrial_bound_sharp(p, t, ecert, sharp, phi_used, n) * (1 + 1e-12):
            bad["b"].append(n)
        if npi.expect(ecert.f) > ecert.b + 1e-9:
            bad["c"].append(n)
        if EN(Q, ecert, phi_used, npi) > EN_plus(Q, ecert, phi_used, npi) * (1 + 1e-12):
            bad["d"].append(n)
    span = f"n in {min(ns)}..{max(ns)} ({len(ns)} points)"
    labels = {
        "a_e": f"|pi - npi| e <= E~_N(n) (floor {ERROR_FLOOR:g})",
        "a_cv": f"|pi - npi| cv / pi cv <= E~_N(n) (floor {ERROR_FLOOR:g})",
        "b": "E~_N(n) <= E~#_N(n)",
        "c": "npi f <= b + 1e-9",
        "d": "E(n) <= E+(n) with monotone v",
    }
    for key, label in labels.items():
        v = bad[key]
        checks.append(Check(label, not v, f"{span}, violations {len(v)}" + (f" first at n={v[0]}" if v else "")))

    # perturbation lam* = lam (1 + rel) under a separate certificate
    ps = RetrialParams(p.s, p.lam * (1 + perturb_rel), p.mu, p.eta)
    tp = RetrialTuning.default(rho, perturb_alpha)
    pc = retrial_certificate(p, tp)
    php = resolvent_summary(Q, pc.K, pc.K + n_offset, beta, threads=threads)
    Z = generator_difference(retrial_generator(ps), Q)
    norm = v_norm_matrix(Z, pc.v, pc.K + 20, exact_beyond=1)
    rep = PerturbationReport.exp(pc, php, norm)
    label = f"perturbation lam*=lam(1+{perturb_rel:g}) at alpha={perturb_alpha:g}"
    if not rep.feasible:
        checks.append(Check(label, None, f"C delta = {sci(rep.C * rep.norm_delta)} >= 1"))
    else:
        try:
            ref_s = reference_stationary(retrial_generator(ps), n_ref, 1e-12, ps)
        except TailMassError as exc:
            checks.append(Check(label, False, str(exc)))
        else:
            w = np.concatenate([pc.v(k) for k in range(n_ref + 1)])
            dist = float(np.abs(ref_s.pi - ref.pi) @ w)
            checks.append(Check(label, dist <= rep.bound,
                                f"||pi* - pi||_v = {sci(dist)} <= {sci(rep.bound)} "
                                f"(C delta = {sci(rep.C * rep.norm_delta)})"))
    return checks


def cmd_validate_bounds(args, out: Sink) -> int:
    if args.model:
        model = build_model(args, args.rho)
        if model.params is None:
            raise DomainError("validate-bounds runs on a retrial model")
        p = model.params
    else:
        p = RetrialParams(2, 1.0, 1.0, 1.0) if args.rho is None else RetrialParams(2, 2 * args.rho, 1.0, 1.0)
    p.require_stable()
    beta = args.beta(p.rho) if args.beta is not None else None
    checks = bound_suite(p, parse_grid(args.n), args.n_ref, beta, args.alpha, args.n_offset,
                         args.phi_scale, args.perturb_rel, args.perturb_alpha, args.threads)
    out.text("\n".join(c.line() for c in checks))
    if any(c.passed is False for c in checks):
        return EXIT_FAILED
    if any(c.passed is None for c in checks):
        return EXIT_INFEASIBLE
    return EXIT_OK


# ---------------------------------------------------------------- argparse

def _common() -> argparse.ArgumentParser:
    c = argparse.ArgumentParser(add_help=False)
    c.add_argument("--model", help="JSON model descriptor (default: retrial s=eta=50, mu=1)")
    c.add_argument("--out", help="output file (default: stdout)")
    c.add_argument("--beta", type=parse_beta, default=None,
                   help="resolvent rate: a number, 1-rho, (1-rho)^p or sqrt(1-rho)")
    c.add_argument("--n-offset", "--N-offset", dest="n_offset", type=int, default=DEFAULT_N_OFFSET,
                   help="N = K + offset for the truncated resolvent (default 100)")
    c.add_argument("--threads", type=int, default=1, help="worker threads for resolvent solves")
    c.add_argument("--alpha", type=float, default=DEFAULT_ALPHA, help="certificate decay base")
    c.add_argument("--sharp-index", type=int, default=DEFAULT_SHARP_INDEX,
                   help="alpha# = alpha + (index/100)(1/rho - alpha)")
    c.add_argument("--certificate", help="certificate JSON for models without a closed form")
    c.add_argument("-v", "--verbose", action="store_true")
    return c


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    ap = argparse.ArgumentParser(prog="lctrunc", description=__doc__.splitlines()[0], parents=[common])
    ap.add_argument("--version", action="version", version=f"lctrunc {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.set_defaults(fn=fn)
        return p

    p = add("validate", cmd_validate, "check the q-matrix structure and the drift certificate")
    p.add_argument("--rho", type=float)
    p.add_argument("--levels", type=int, default=200)

    p = add("solve", cmd_solve, "stationary distribution of the level-n augmented truncation")
    p.add_argument("--rho", type=float)
    p.add_argument("--n", type=int, required=True)

    p = add("phi", cmd_phi, "phi-bar of the truncated resolvent")
    p.add_argument("--rho", type=float)
    p.add_argument("--K", default="auto", help="drift-set level or 'auto'")

    p = add("bounds", cmd_bounds, "error decay curves over an n grid")
    p.add_argument("--rho", type=float)
    p.add_argument("--kind", default="EN,EN_sharp")
    p.add_argument("--n", default="1..300")
    p.add_argument("--csv")

    p = add("perturb", cmd_perturb, "perturbation bound between two models")
    p.add_argument("--model-star", required=True)
    p.add_argument("--levels", type=int, default=200)

    p = add("table-kphi", cmd_table_kphi, "K and phi-bar for several N offsets")
    p.add_argument("--rhos")
    p.add_argument("--offsets", default=",".join(map(str, TABLE_OFFSETS)))

    p = add("table-beta", cmd_table_beta, "phi-bar and 1/(beta phi-bar) under several beta rules")
    p.add_argument("--rhos")
    p.add_argument("--rules", help="comma-separated beta rules")

    p = add("table-x", cmd_table_x, "x for which the sweep reaches the default alpha")
    p.add_argument("--rhos")

    p = add("figure", cmd_figure, "curve data for a figure setup")
    p.add_argument("--id", type=int, required=True, choices=(1, 2, 4, 5, 6, 7))
    p.add_argument("--rhos")
    p.add_argument("--n", default="1..300")
    p.add_argument("--points", type=int, default=19, help="sweep points in (0, 1) for figures 1 and 2")

    p = add("validate-bounds", cmd_validate_bounds, "desk-scale bound validity suite")
    p.add_argument("--rho", type=float, help="rho for the default s=2 model (lam = 2 rho)")
    p.add_argument("--n", default="10..200")
    p.add_argument("--n-ref", type=int, default=600)
    p.add_argument("--phi-scale", type=float, default=1.0, help="multiply phi-bar (fault injection)")
    p.add_argument("--perturb-rel", type=float, default=1e-4)
    p.add_argument("--perturb-alpha", type=float, default=1.1)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = Sink(args.out)
    try:
        return args.fn(args, out)
    except (InfeasibleError, DomainError, NotFoundError) as exc:
        print(f"lctrunc: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (SingularityError, NonConvergenceError, TailMassError) as exc:
        print(f"lctrunc: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (StructureError, LCTruncError, OSError, ValueError, KeyError) as exc:
        print(f"lctrunc: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
