"""Reliability of brittle components: FEM stress, flaw statistics and shape optimization."""

from .elasticity import (DirichletSpec, LoadCase, MaterialParams, StressField, compute_stress,
                         solve_state)
from .errors import *  # noqa: F401,F403
from .fracture import (PowerLawMeasure, TabulatedMeasure, WeibullMeasure, critical_radius,
                       hazard_convexity_check, normal_stress, stress_intensity)
from .geometry import (AdmissibilityConstants, BoxScenario, DesignVector, Mesh,
                       RectangleScenario, check_admissible, generate_mesh, volume)
from .ppp_mc import McEstimate, estimate_survival, sample_trial, truncation_radius
from .reliability import (ReliabilityResult, build_quadrature, local_intensity, objective,
                          survival_probability, weibull_local_intensity)
from .shapeopt import (OptimizationConfig, OptimizationTrace, Pipeline, evaluate_design,
                       gradient_fd, optimize, toy_tensile_plate)

__version__ = "0.1.0"
