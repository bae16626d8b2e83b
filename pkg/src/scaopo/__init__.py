"""Model-free constrained policy search for long-run average costs.

The package trains a stochastic policy to minimize one long-run average
cost subject to limits on others, using only sampled transitions: each
iteration refreshes moving-average value and gradient estimates from a
trailing experience window, builds strongly convex quadratic models of
every cost around the current parameters, and takes a damped step toward
the models' constrained minimizer (or, when the models are infeasible,
toward the point of least violation).
"""

from .config import ConfigError, RunConfig, load_config, validate_config
from .driver import DriverConfig, IterationRecord, ScaopoDriver, StepSchedule
from .errors import (CheckpointError, ConfigurationError,
                     ContractViolationError, DegenerateDualError,
                     NotReadyError, ScaopoError)
from .estimator import (EstimateState, Experience, ReplayWindow,
                        sample_gradient, sample_value, update_estimates,
                        window_schedule)
from .policy import GaussianMlpPolicy, MlpArch, ThresholdedGaussianPolicy
from .solver import (SolverOptions, SubproblemSolution, SurrogateModel,
                     build_surrogates, check_feasibility, inner_minimizer,
                     project_simplex, solve_feasible_update,
                     solve_objective_update, solve_subproblem,
                     surrogate_eval, surrogate_grad)

__version__ = "0.1.0"

__all__ = [
    "CheckpointError", "ConfigError", "ConfigurationError",
    "ContractViolationError", "DegenerateDualError", "DriverConfig",
    "EstimateState", "Experience", "GaussianMlpPolicy", "IterationRecord",
    "MlpArch", "NotReadyError", "ReplayWindow", "RunConfig", "ScaopoDriver",
    "ScaopoError", "SolverOptions", "StepSchedule", "SubproblemSolution",
    "SurrogateModel", "ThresholdedGaussianPolicy", "build_surrogates",
    "check_feasibility", "inner_minimizer", "load_config", "project_simplex",
    "sample_gradient", "sample_value", "solve_feasible_update",
    "solve_objective_update", "solve_subproblem", "surrogate_eval",
    "surrogate_grad", "update_estimates", "validate_config",
    "window_schedule",
]
