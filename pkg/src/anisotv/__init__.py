"""Anisotropic total variation: solvers, dual calibrations and their diagnostics."""

__version__ = "0.1.0"

from .anisotropy import (AnisotropyModel, check_strong_convexity, dual_constraint_project,
                         f_eval, f_grad, f_polar, polar_grad, preset)
from .counterexample import (CounterexampleConfig, average_large_ball, average_small_ball,
                             div_lp_norm, eval_field, lebesgue_failure_report)
from .estimator import TVCalibration
from .exceptions import *  # noqa: F401,F403
from .geometry import (LevelSetView, boundary_normal, coarea_check, density_ratio, perimeter,
                       theta_indicator, upper_level_set)
from .grid import (GridSpec, ScalarField, VectorField, ball_average, cylinder_average,
                   divergence, gradient)
from .pairing import BlowupSeries, blowup, normal_trace, pairing_apply, verify_zeqnu
from .solver import (CalibrationReport, ProblemSpec, SolveResult, primal_energy, solve,
                     verify_subgradient)
