# Frozen-data and time-dependent solvers
from .elliptic import FrozenData, SolveConfig, apriori_bound_check, minty_residual, solve_frozen
from .evolution import EvolutionConfig, EvolutionReport, picard_global, time_march

__all__ = [
    "FrozenData",
    "SolveConfig",
    "apriori_bound_check",
    "minty_residual",
    "solve_frozen",
    "EvolutionConfig",
    "EvolutionReport",
    "picard_global",
    "time_march",
]
