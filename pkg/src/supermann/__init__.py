"""Quasi-Newton accelerated fixed-point iterations for nonexpansive
operators, with operator-splitting benchmark problems."""

from .directions import (BroydenDirections, RestartedBroydenDirections,
                         ZeroDirections, powell_theta, truncate,
                         zero_direction)
from .engine import (SolverConfig, SolveResult, StepRecord, km_solve,
                     supermann_solve, supermann_step)
from .gkm import accepts, gkm_update, separation_rho
from .operators import (AveragedOperator, Ball, Box, Counter, FreeCone,
                        Halfspace, Hyperplane, NonnegOrthant,
                        PolyhedralCone2D, ProductSet, SecondOrderCone,
                        ZeroCone, make_alternating_projections, make_drs,
                        make_fbs, make_vu_condat, project, soft_threshold)
from .problems import (ProblemInstance, build_ball_line_example,
                       build_cone_program, build_cones_example, build_lasso,
                       build_oscillating_masses, build_soc_example,
                       cone_residuals, export_instance, load_instance)
from .space import Metric, euclidean, inner, norm, set_debug_checks

__version__ = "0.1.0"

__all__ = [
    "AveragedOperator", "Ball", "Box", "BroydenDirections", "Counter",
    "FreeCone", "Halfspace", "Hyperplane", "Metric", "NonnegOrthant",
    "PolyhedralCone2D", "ProblemInstance", "ProductSet",
    "RestartedBroydenDirections", "SecondOrderCone", "SolveResult",
    "SolverConfig", "StepRecord", "ZeroCone", "ZeroDirections", "accepts",
    "build_ball_line_example", "build_cone_program", "build_cones_example",
    "build_lasso", "build_oscillating_masses", "build_soc_example",
    "cone_residuals", "euclidean", "export_instance", "gkm_update", "inner",
    "km_solve", "load_instance", "make_alternating_projections", "make_drs",
    "make_fbs", "make_vu_condat", "norm", "powell_theta", "project",
    "separation_rho", "set_debug_checks", "soft_threshold", "supermann_solve",
    "supermann_step", "truncate", "zero_direction",
]
