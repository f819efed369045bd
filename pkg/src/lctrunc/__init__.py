"""Augmented truncations of block-structured Markov chains with computable error bounds."""

__version__ = "0.1.0"

from .errors import (DomainError, InfeasibleError, LCTruncError, NonConvergenceError, NotFoundError,
                     SingularityError, StructureError, TailMassError)
from .generator import (BlockGenerator, FiniteQMatrix, LevelLayout, finite_from_dense, generator_difference,
                        lc_block_augment, northwest_truncation, validate_qmatrix)
from .models import (RetrialParams, ldqbd_generator, load_block_file, load_model, mm1_generator,
                     model_from_descriptor, retrial_generator, save_block_file)
from .stationary import (TruncatedStationary, deviation_matrix_finite, reference_stationary,
                         solve_stationary, solve_stationary_dense, solve_stationary_ldqbd,
                         solve_stationary_retrial_rank1)
from .resolvent import (ResolventSummary, find_valid_N, phi_bar, resolvent_neumann, resolvent_rows,
                        resolvent_summary)
from .certificates import (DriftCertificate, ExponentialCertificate, MonotonicityWarning, RetrialTuning,
                           SharpCertificate, certificate_from_json, check_monotone, mm1_certificate,
                           pi_f_upper, pi_v_upper, retrial_certificate, retrial_default_gamma,
                           retrial_sharp_certificate, sharp_alpha, verify_drift)
from .bounds import (EN, EN_plus, EN_sharp, ErrorCurve, build_hat_generator, error_decay_E,
                     error_decay_E_plus, error_decay_E_sharp, exp_curve, ldqbd_bound, reduction_bounds,
                     log10_bound_sharp, retrial_bound_1, retrial_bound_sharp, tail_sums, write_curves_csv)
from .perturbation import (C_constant, C_hat_constant, PerturbationReport, VNorm, perturbation_bound_exp,
                           perturbation_bound_general, v_norm_matrix)

__all__ = [
    "BlockGenerator",
    "build_hat_generator",
    "C_constant",
    "C_hat_constant",
    "certificate_from_json",
    "check_monotone",
    "deviation_matrix_finite",
    "DomainError",
    "DriftCertificate",
    "EN",
    "EN_plus",
    "EN_sharp",
    "error_decay_E",
    "error_decay_E_plus",
    "error_decay_E_sharp",
    "ErrorCurve",
    "exp_curve",
    "ExponentialCertificate",
    "find_valid_N",
    "finite_from_dense",
    "FiniteQMatrix",
    "generator_difference",
    "InfeasibleError",
    "lc_block_augment",
    "LCTruncError",
    "ldqbd_bound",
    "ldqbd_generator",
    "log10_bound_sharp",
    "LevelLayout",
    "load_block_file",
    "load_model",
    "mm1_certificate",
    "mm1_generator",
    "model_from_descriptor",
    "MonotonicityWarning",
    "NonConvergenceError",
    "northwest_truncation",
    "NotFoundError",
    "perturbation_bound_exp",
    "perturbation_bound_general",
    "PerturbationReport",
    "phi_bar",
    "pi_f_upper",
    "pi_v_upper",
    "reduction_bounds",
    "reference_stationary",
    "resolvent_neumann",
    "resolvent_rows",
    "resolvent_summary",
    "ResolventSummary",
    "retrial_bound_1",
    "retrial_bound_sharp",
    "retrial_certificate",
    "retrial_default_gamma",
    "retrial_generator",
    "retrial_sharp_certificate",
    "RetrialParams",
    "RetrialTuning",
    "save_block_file",
    "sharp_alpha",
    "SharpCertificate",
    "SingularityError",
    "solve_stationary",
    "solve_stationary_dense",
    "solve_stationary_ldqbd",
    "solve_stationary_retrial_rank1",
    "StructureError",
    "tail_sums",
    "TailMassError",
    "TruncatedStationary",
    "v_norm_matrix",
    "validate_qmatrix",
    "verify_drift",
    "VNorm",
    "write_curves_csv",
]
