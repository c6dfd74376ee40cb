"""Newton-type proximal gradient method for composite multi-objective problems."""

__version__ = "0.1.0"

from .problem import (ConvexPiece, EvalCounter, InvalidArgument, MultiObjectiveProblem,
                      PiecewiseMaxFunction, SmoothFunction, dominates, eval_objectives,
                      nondominated_filter, subgradient_g)
from .subproblem import (MinimaxModel, SubproblemError, SubproblemSolution, build_model,
                         build_prox_model, is_critical, kkt_residual, solve)

__all__ = [
    "ConvexPiece", "EvalCounter", "InvalidArgument", "MultiObjectiveProblem", "PiecewiseMaxFunction",
    "SmoothFunction", "dominates", "eval_objectives", "nondominated_filter", "subgradient_g",
    "MinimaxModel", "SubproblemError", "SubproblemSolution", "build_model", "build_prox_model",
    "is_critical", "kkt_residual", "solve",
]
