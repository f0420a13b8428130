"""
Solver exception hierarchy.

Every failure the library raises derives from SolverError so the CLI can map
it to an exit code in one place.
"""

from typing import List, Optional, Sequence


class SolverError(Exception):
    """Base class for all solver failures."""


class DimensionError(SolverError):
    """Vector or matrix dimensions do not agree."""


class MetricError(SolverError):
    """Gram matrix is not symmetric positive definite."""


class OperatorNormError(SolverError):
    """Power iteration for an operator norm did not converge."""

    def __init__(self, message: str, last_estimate: float, last_iterate=None):
        super().__init__(message)
        self.last_estimate = last_estimate
        self.last_iterate = last_iterate


class SmallnessViolation(SolverError):
    """The smallness margin is not positive, so the solvers refuse to run."""

    def __init__(self, margin: float, what: str = "m_A - m_j*|M|^2 - alpha_phi"):
        super().__init__(
            f"smallness condition violated: {what} = {margin:.6e} <= 0"
        )
        self.margin = margin


class ConvergenceError(SolverError):
    """An iteration hit its cap before meeting its tolerance."""

    def __init__(
        self,
        message: str,
        stage: str,
        residual_history: Sequence[float] = (),
        node: Optional[int] = None,
    ):
        if node is not None:
            message = f"{message} (time node {node})"
        super().__init__(message)
        self.stage = stage
        self.residual_history: List[float] = list(residual_history)
        self.node = node


class StepSizeError(SolverError):
    """Forward-backward residual blew up for the given step."""

    def __init__(
        self, step: float, residual_history: Sequence[float] = (), node: Optional[int] = None
    ):
        message = f"iteration diverged with step rho={step:.3e}; retry with rho <= {step / 2:.3e}"
        if node is not None:
            message = f"{message} (time node {node})"
        super().__init__(message)
        self.step = step
        self.residual_history = list(residual_history)
        self.node = node


class HistoryConfigError(SolverError):
    """History operator misconfigured or queried outside its grid."""


class InfeasibleProbeError(SolverError):
    """A Minty probe lies outside the constraint set."""


class MeshError(SolverError):
    """Degenerate mesh geometry or tagging."""


class ScenarioError(SolverError):
    """Scenario document could not be parsed or validated."""

    def __init__(
        self,
        message: str,
        line: Optional[int] = None,
        column: Optional[int] = None,
        path: Optional[str] = None,
    ):
        where = ""
        if line is not None:
            where = f" at line {line}, column {column}"
        if path:
            where = f" in {path}{where}"
        super().__init__(f"{message}{where}")
        self.line = line
        self.column = column
        self.path = path
