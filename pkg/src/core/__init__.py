# Galerkin spaces, potentials and the solver exception hierarchy
# (problem.py is imported directly; it depends on src.history)
from .errors import (
    ConvergenceError,
    DimensionError,
    HistoryConfigError,
    InfeasibleProbeError,
    MeshError,
    MetricError,
    OperatorNormError,
    ScenarioError,
    SmallnessViolation,
    SolverError,
    StepSizeError,
)
from .spaces import ConstraintSet, DofVector, EnergyMetric, TraceOperator

__all__ = [
    "ConvergenceError",
    "DimensionError",
    "HistoryConfigError",
    "InfeasibleProbeError",
    "MeshError",
    "MetricError",
    "OperatorNormError",
    "ScenarioError",
    "SmallnessViolation",
    "SolverError",
    "StepSizeError",
    "ConstraintSet",
    "DofVector",
    "EnergyMetric",
    "TraceOperator",
]
