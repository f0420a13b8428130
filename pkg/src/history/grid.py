"""
Uniform time grids, quadrature weights and sampled trajectories.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence

import numpy as np

from ..core.errors import DimensionError, HistoryConfigError
from ..core.spaces import DofVector, EnergyMetric

logger = logging.getLogger(__name__)


class QuadratureRule(str, Enum):
    LEFT_RECTANGLE = "left-rectangle"
    TRAPEZOID = "trapezoid"


@dataclass(frozen=True)
class TimeGrid:
    """Nodes t_n = n*T/N, n = 0..N."""

    T: float
    N: int

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"horizon T must be positive, got {self.T}")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"step count N must be a positive integer, got {self.N}")
        object.__setattr__(self, "N", int(self.N))

    @property
    def dt(self) -> float:
        return self.T / self.N

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.N + 1) * self.dt

    def time(self, n: int) -> float:
        self.check_node(n)
        return n * self.dt

    def check_node(self, n: int):
        if not 0 <= n <= self.N:
            raise HistoryConfigError(f"node index {n} outside grid 0..{self.N}")

    def weights(self, n: int, rule: QuadratureRule = QuadratureRule.LEFT_RECTANGLE) -> np.ndarray:
        """Weights q_k, k = 0..n, of the rule on [0, t_n]."""
        self.check_node(n)
        q = np.full(n + 1, self.dt)
        if n == 0:
            return np.zeros(1)
        if QuadratureRule(rule) == QuadratureRule.LEFT_RECTANGLE:
            q[n] = 0.0
        else:
            q[0] = q[n] = self.dt / 2.0
        return q

    def halved(self) -> "TimeGrid":
        return TimeGrid(self.T, 2 * self.N)

    def to_dict(self) -> dict:
        return {"T": self.T, "N": self.N}


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Velocity samples w_n at every grid node, stored as an (N+1, dim) array."""

    grid: TimeGrid
    samples: np.ndarray

    def __post_init__(self):
        arr = np.array(self.samples, dtype=float, copy=True)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.shape[0] != self.grid.N + 1:
            raise DimensionError(
                f"trajectory needs {self.grid.N + 1} samples, got {arr.shape[0]}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("trajectory samples must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    @classmethod
    def zeros(cls, grid: TimeGrid, dim: int) -> "Trajectory":
        return cls(grid, np.zeros((grid.N + 1, dim)))

    @classmethod
    def constant(cls, grid: TimeGrid, value) -> "Trajectory":
        value = np.atleast_1d(np.asarray(value, dtype=float))
        return cls(grid, np.tile(value, (grid.N + 1, 1)))

    def sample(self, n: int) -> DofVector:
        self.grid.check_node(n)
        return DofVector(self.samples[n])


def spatial_norms(values: np.ndarray, metric: Optional[EnergyMetric] = None, weights=None) -> np.ndarray:
    """Per-node norms of an (N+1, k) array in the V metric or a diagonal metric.

    A 1D array is a scalar trajectory, one value per node.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    if metric is not None:
        sq = np.einsum("ni,ij,nj->n", values, metric.gram, values)
    elif weights is not None:
        sq = values**2 @ np.asarray(weights, dtype=float)
    else:
        sq = np.sum(values**2, axis=1)
    return np.sqrt(np.maximum(sq, 0.0))


def l2_norm(
    values: np.ndarray,
    grid: TimeGrid,
    rule: QuadratureRule = QuadratureRule.LEFT_RECTANGLE,
    n: Optional[int] = None,
    metric: Optional[EnergyMetric] = None,
    weights=None,
) -> float:
    """Discrete L2(0, t_n) norm with the history quadrature rule."""
    n = grid.N if n is None else n
    norms = spatial_norms(np.asarray(values)[: n + 1], metric, weights)
    return float(np.sqrt(np.sum(grid.weights(n, rule) * norms**2)))


def running_l2_norms(
    values: np.ndarray,
    grid: TimeGrid,
    rule: QuadratureRule = QuadratureRule.LEFT_RECTANGLE,
    metric: Optional[EnergyMetric] = None,
    weights=None,
) -> np.ndarray:
    """L2(0, t_n) norms for every n at once."""
    sq = spatial_norms(values, metric, weights) ** 2
    return np.sqrt(np.maximum(cumulative_quadrature(sq, grid.dt, rule), 0.0))


def cumulative_quadrature(values: np.ndarray, dt: float, rule: QuadratureRule) -> np.ndarray:
    """Integrals over [0, t_n] for every n of nodal values (first axis = time)."""
    values = np.asarray(values, dtype=float)
    total = np.cumsum(values, axis=0)
    out = np.zeros_like(total)
    if QuadratureRule(rule) == QuadratureRule.LEFT_RECTANGLE:
        out[1:] = dt * total[:-1]
    else:
        out[1:] = dt * (total[1:] - 0.5 * values[0] - 0.5 * values[1:])
    return out


def trajectory_distance(
    a: Trajectory,
    b: Trajectory,
    metric: Optional[EnergyMetric] = None,
    rule: QuadratureRule = QuadratureRule.LEFT_RECTANGLE,
) -> float:
    if a.grid != b.grid or a.dim != b.dim:
        logger.error(f"cannot compare trajectories: grids {a.grid} vs {b.grid}, dimensions {a.dim} vs {b.dim}")
        raise DimensionError("trajectories live on different grids or spaces")
    return l2_norm(a.samples - b.samples, a.grid, rule, metric=metric)


def refinement_ratios(errors: Sequence[float]) -> List[float]:
    """e_k / e_(k+1) for errors on successively halved grids."""
    errors = [float(e) for e in errors]
    if any(e == 0.0 for e in errors[1:]):
        logger.debug("refinement ratios skip levels with zero error")
    return [errors[k] / errors[k + 1] for k in range(len(errors) - 1) if errors[k + 1] > 0]
