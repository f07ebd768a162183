"""Direct policy optimization for the infinite-horizon discrete-time LQR problem.

Exact gradient descent, natural policy gradient and Gauss-Newton with
closed-form or backtracking step sizes; model-free zeroth-order variants from
simulated trajectories; a fixed-point Riccati baseline as ground truth; and a
numerical certification suite for the structural properties the solvers rely
on (gradient domination, almost smoothness, perturbation bounds).
"""

from .errors import (
    DivergedTrajectoryError,
    EstimationFailedError,
    IllConditionedCovarianceError,
    InvalidInputError,
    LqrpgError,
    NotSamplableError,
    ProblemFileError,
    RiccatiConvergenceError,
    SingularMatrixError,
    UnstablePolicyError,
)
from .exact_opt import SolverConfig, optimize, paper_step_size
from .lqr import (
    InitialStateModel,
    LqrProblem,
    PolicyEvaluation,
    advantage,
    evaluate,
    gauss_newton_direction,
    gradient_direction,
    natural_direction,
    optimality_gap_bounds,
    policy_cost,
)
from .riccati import RiccatiSolution, solve_dare
from .sim import (
    RngHandle,
    Simulator,
    Trajectory,
    finite_horizon_moments,
    horizon_for_accuracy,
    horizon_for_covariance,
    practical_horizon,
    rollout,
    sample_initial_state,
)
from .traces import ConvergenceTrace, TraceRecord, write_trace_csv
from .verify import CheckReport, run_suite
from .zorder import GradientEstimate, ZerothOrderConfig, estimate, run_modelfree, sample_sphere_matrix

__all__ = [
    "ConvergenceTrace",
    "CheckReport",
    "DivergedTrajectoryError",
    "EstimationFailedError",
    "GradientEstimate",
    "IllConditionedCovarianceError",
    "InitialStateModel",
    "InvalidInputError",
    "LqrProblem",
    "LqrpgError",
    "NotSamplableError",
    "PolicyEvaluation",
    "ProblemFileError",
    "RiccatiConvergenceError",
    "RiccatiSolution",
    "RngHandle",
    "Simulator",
    "SingularMatrixError",
    "SolverConfig",
    "TraceRecord",
    "Trajectory",
    "UnstablePolicyError",
    "ZerothOrderConfig",
    "advantage",
    "estimate",
    "evaluate",
    "finite_horizon_moments",
    "gauss_newton_direction",
    "gradient_direction",
    "horizon_for_accuracy",
    "horizon_for_covariance",
    "natural_direction",
    "optimality_gap_bounds",
    "optimize",
    "paper_step_size",
    "policy_cost",
    "practical_horizon",
    "rollout",
    "run_modelfree",
    "run_suite",
    "sample_initial_state",
    "sample_sphere_matrix",
    "solve_dare",
    "write_trace_csv",
]
