"""Compactness and diameter criteria for manifolds with radial Ricci lower bounds.

A radial profile q bounds Ricci curvature from below along geodesics; a
positive monotone test function psi turns q into a scalar functional whose
size decides whether rays can exist.  The package evaluates that functional,
derives compactness verdicts and diameter bounds, and integrates the scalar
model ODE used to check the underlying comparison arguments.
"""

from .criteria import (
    COMPACT, INCONCLUSIVE, compactness_verdict, diameter_bound, exp_thresholds,
    optimize_constant_psi, poly_threshold, wan_threshold,
)
from .errors import BonnetMyersError, NumericalError, ValidationError
from .functional import calabi_bound, eval_F, eval_segment_criterion, ray_tail_check
from .model_sim import simulate_model, solve_squeeze
from .profiles import (
    Constant, ConstantPsi, ExpDecay, Piecewise, PolyDecay, PowerPsi, Sampled, SampledPsi,
    SqrtProfilePsi, profile_from_dict, psi_from_dict,
)

__version__ = "0.1.0"

__all__ = [
    "COMPACT", "INCONCLUSIVE", "compactness_verdict", "diameter_bound", "exp_thresholds",
    "optimize_constant_psi", "poly_threshold", "wan_threshold", "BonnetMyersError",
    "NumericalError", "ValidationError", "calabi_bound", "eval_F", "eval_segment_criterion",
    "ray_tail_check", "simulate_model", "solve_squeeze", "Constant", "ConstantPsi", "ExpDecay",
    "Piecewise", "PolyDecay", "PowerPsi", "Sampled", "SampledPsi", "SqrtProfilePsi",
    "profile_from_dict", "psi_from_dict",
]
