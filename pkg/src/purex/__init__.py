"""Pure exploration of bandit policies under unknown linear constraints."""
from .core import BanditInstance, InstanceError, Observation, build_instance, sample_step
from .estimation import EstimatorState, pessimistic_matrix
from .gamesolver import characteristic_time, evaluate_D, solve_game
from .metrics import Summary, complexity_diagnostics, summarize
from .polytope import FeasiblePolytope, polytope_from_constraints, simplex_polytope
from .samplers import ALGORITHMS, RunConfig, RunRecord, TrackingViolation, run
from .stopping import StoppingConfig, glr_statistic

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS",
    "BanditInstance",
    "EstimatorState",
    "FeasiblePolytope",
    "InstanceError",
    "Observation",
    "RunConfig",
    "RunRecord",
    "StoppingConfig",
    "Summary",
    "TrackingViolation",
    "build_instance",
    "characteristic_time",
    "complexity_diagnostics",
    "evaluate_D",
    "glr_statistic",
    "pessimistic_matrix",
    "polytope_from_constraints",
    "run",
    "sample_step",
    "simplex_polytope",
    "solve_game",
    "summarize",
]
