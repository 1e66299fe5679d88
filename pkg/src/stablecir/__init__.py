"""Small-noise CIR-type model driven by spectrally positive stable noise.

Tabulated stable law, path simulation, the likelihood-type criterion and its
maximizer, and the asymptotic covariance of the standardized estimator.
"""

from .asymptotics import limit_criterion, limit_hessian, moments_m, sigma_matrix, v_integrals
from .estimator import EstimateReport, EstimatorOptions, ParamBox, maximize, standardize
from .likelihood import Criterion, DegeneratePathError, ParamPoint, objective_u, rate
from .model import ModelSpec, ObservedPath, condition_c11, simulate_path, y0_limit
from .stable import StableLaw, build_density, laplace_exponent, sample_z

__version__ = "0.1.0"

__all__ = [
    "Criterion",
    "DegeneratePathError",
    "EstimateReport",
    "EstimatorOptions",
    "ModelSpec",
    "ObservedPath",
    "ParamBox",
    "ParamPoint",
    "StableLaw",
    "build_density",
    "condition_c11",
    "laplace_exponent",
    "limit_criterion",
    "limit_hessian",
    "maximize",
    "moments_m",
    "objective_u",
    "rate",
    "sample_z",
    "sigma_matrix",
    "simulate_path",
    "standardize",
    "v_integrals",
    "y0_limit",
]
