"""Single-level MIP approximation of weakly connected adjustable robust programs."""
from .branch_bound import MipParams, MipSolution, solve_mip
from .lpmodel import LpModel, MipModel
from .model import (FirstLevel, OmegaStandard, Polytope, ThirdLevel, WcaroInstance,
                    validate_instance)
from .oracle import CertReport, adversarial_value, certify
from .reformulate import build_mccormick_relaxation, build_single_level, dualize_lp
from .simplex import LpParams, LpSolution, solve_lp

__version__ = "0.1.0"

__all__ = ["CertReport", "FirstLevel", "LpModel", "LpParams", "LpSolution", "MipModel",
           "MipParams", "MipSolution", "OmegaStandard", "Polytope", "ThirdLevel",
           "WcaroInstance", "adversarial_value", "build_mccormick_relaxation",
           "build_single_level", "certify", "dualize_lp", "solve_lp", "solve_mip",
           "validate_instance"]
