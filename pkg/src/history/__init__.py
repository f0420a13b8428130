# Time grids, trajectories and history operators
from .grid import QuadratureRule, TimeGrid, Trajectory
from .operators import HistoryBundle, HistoryStates, eval_history, integrate_displacement

__all__ = [
    "QuadratureRule",
    "TimeGrid",
    "Trajectory",
    "HistoryBundle",
    "HistoryStates",
    "eval_history",
    "integrate_displacement",
]
