"""
Discrete history (Volterra) operators.

All operators act on velocity samples w_0..w_N. Displacements come from the
integral operator I: u(t_n) = u0 + quadrature of w over [0, t_n]. Under the
left-rectangle rule every operator is strictly causal.
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..core.errors import DimensionError, HistoryConfigError
from ..core.spaces import DofVector, EnergyMetric
from .grid import (
    QuadratureRule,
    TimeGrid,
    Trajectory,
    cumulative_quadrature,
    l2_norm,
    spatial_norms,
)

logger = logging.getLogger(__name__)


class HistoryKind(str, Enum):
    STRESS_MEMORY = "R1-stress-memory"
    ZERO = "R2-zero"
    SLIP_AND_NORMAL = "R3-slip-and-normal"
    NORMAL_DISPLACEMENT = "R4-normal-displacement"
    CUSTOM = "custom-volterra"


def displacements(
    samples: np.ndarray, dt: float, u0: np.ndarray, n: int, rule: QuadratureRule
) -> np.ndarray:
    """u_m = (I w)(t_m) for m = 0..n, from prefix sums."""
    w = np.asarray(samples, dtype=float)[: n + 1]
    return u0[None, :] + cumulative_quadrature(w, dt, rule)


def integrate_displacement(
    traj: Trajectory,
    n: int,
    u0=None,
    rule: QuadratureRule = QuadratureRule.LEFT_RECTANGLE,
) -> DofVector:
    """u0 + quadrature of w over [0, t_n]."""
    traj.grid.check_node(n)
    u0 = np.zeros(traj.dim) if u0 is None else np.asarray(u0, dtype=float).reshape(-1)
    if u0.shape[0] != traj.dim:
        raise DimensionError(f"u0 has dimension {u0.shape[0]}, trajectory {traj.dim}")
    return DofVector(displacements(traj.samples, traj.grid.dt, u0, n, rule)[n])


@dataclass(frozen=True)
class ExponentialKernel:
    """Scalar relaxation kernel amplitude * exp(-s / relaxation)."""

    amplitude: float
    relaxation: float

    def __post_init__(self):
        if self.amplitude < 0 or not self.relaxation > 0:
            raise ValueError("kernel needs amplitude >= 0 and relaxation > 0")

    def __call__(self, lag):
        return self.amplitude * np.exp(-np.asarray(lag, dtype=float) / self.relaxation)

    @property
    def sup(self) -> float:
        return self.amplitude


class HistoryOperator(ABC):
    """Maps a velocity trajectory to states at each grid node."""

    kind: HistoryKind
    rule: QuadratureRule
    output_weights: np.ndarray

    @property
    def output_dim(self) -> int:
        return self.output_weights.shape[0]

    @abstractmethod
    def evaluate(self, samples: np.ndarray, grid: TimeGrid, n: int) -> np.ndarray:
        ...

    def evaluate_all(self, samples: np.ndarray, grid: TimeGrid) -> np.ndarray:
        return np.stack([self.evaluate(samples, grid, n) for n in range(grid.N + 1)])

    def output_norm(self, value: np.ndarray) -> float:
        return float(np.sqrt(np.sum(self.output_weights * np.asarray(value) ** 2)))

    def _check(self, samples: np.ndarray, grid: TimeGrid, n: int, dim: Optional[int]):
        grid.check_node(n)
        if samples.shape[0] != grid.N + 1:
            raise HistoryConfigError("samples do not match the time grid")
        if dim is not None and samples.shape[1] != dim:
            raise HistoryConfigError(
                f"{self.kind.value} expects DoF dimension {dim}, got {samples.shape[1]}"
            )


def _weights(weights, size: int) -> np.ndarray:
    w = np.ones(size) if weights is None else np.asarray(weights, dtype=float).reshape(-1)
    if w.shape != (size,) or np.any(w <= 0):
        raise HistoryConfigError("output weights must be positive, one per output component")
    return w


@dataclass(frozen=True, eq=False)
class ZeroHistory(HistoryOperator):
    out_dim: int = 0
    weights: Optional[np.ndarray] = None
    rule: QuadratureRule = QuadratureRule.LEFT_RECTANGLE
    kind: HistoryKind = field(default=HistoryKind.ZERO, init=False)

    @property
    def output_weights(self):
        return _weights(self.weights, self.out_dim)

    def evaluate(self, samples, grid, n):
        grid.check_node(n)
        return np.zeros(self.out_dim)

    def evaluate_all(self, samples, grid):
        return np.zeros((grid.N + 1, self.out_dim))


@dataclass(frozen=True, eq=False)
class VolterraHistory(HistoryOperator):
    """R w(t_n) = S (I w)(t_n) + sum_k q_k kernel(t_n - t_k) Q w_k.

    static_map S and kernel_map Q map DoFs to the output space; either may be
    omitted. With S = B-elasticity-times-strain and Q = B-times-strain this is
    the stress memory of a viscoelastic body.
    """

    static_map: Optional[np.ndarray]
    kernel_map: Optional[np.ndarray]
    kernel: Optional[Callable[[np.ndarray], np.ndarray]]
    u0: np.ndarray
    rule: QuadratureRule = QuadratureRule.LEFT_RECTANGLE
    weights: Optional[np.ndarray] = None
    kind: HistoryKind = HistoryKind.STRESS_MEMORY

    def __post_init__(self):
        maps = [m for m in (self.static_map, self.kernel_map) if m is not None]
        if not maps:
            raise HistoryConfigError("Volterra operator needs a static map or a kernel map")
        if (self.kernel_map is None) != (self.kernel is None):
            raise HistoryConfigError("kernel and kernel_map must be given together")
        shapes = {np.shape(m) for m in maps}
        if len(shapes) != 1:
            raise HistoryConfigError(f"static and kernel maps disagree in shape: {shapes}")
        out_dim, dim = shapes.pop()
        u0 = np.asarray(self.u0, dtype=float).reshape(-1)
        if u0.shape[0] != dim:
            raise HistoryConfigError(f"u0 has dimension {u0.shape[0]}, maps expect {dim}")
        object.__setattr__(self, "u0", u0)
        object.__setattr__(self, "rule", QuadratureRule(self.rule))
        object.__setattr__(self, "kind", HistoryKind(self.kind))
        object.__setattr__(self, "weights", _weights(self.weights, out_dim))

    @property
    def output_weights(self):
        return self.weights

    @property
    def dim(self) -> int:
        return self.u0.shape[0]

    def evaluate(self, samples, grid, n):
        samples = np.asarray(samples, dtype=float)
        self._check(samples, grid, n, self.dim)
        out = np.zeros(self.output_dim)
        if self.static_map is not None:
            out += self.static_map @ displacements(samples, grid.dt, self.u0, n, self.rule)[n]
        if self.kernel_map is not None and n > 0:
            q = grid.weights(n, self.rule)
            lags = grid.nodes[n] - grid.nodes[: n + 1]
            mixed = (q * self.kernel(lags)) @ samples[: n + 1]
            out += self.kernel_map @ mixed
        return out

    def evaluate_all(self, samples, grid):
        samples = np.asarray(samples, dtype=float)
        self._check(samples, grid, 0, self.dim)
        out = np.zeros((grid.N + 1, self.output_dim))
        if self.static_map is not None:
            u = displacements(samples, grid.dt, self.u0, grid.N, self.rule)
            out += u @ self.static_map.T
        if self.kernel_map is not None:
            mapped = samples @ self.kernel_map.T
            nodes = grid.nodes
            for n in range(1, grid.N + 1):
                q = grid.weights(n, self.rule) * self.kernel(nodes[n] - nodes[: n + 1])
                out[n] += q @ mapped[: n + 1]
        return out


@dataclass(frozen=True, eq=False)
class DisplacementHistory(HistoryOperator):
    """R w(t_n) = L (I w)(t_n) for a linear map L (normal displacements)."""

    linear_map: np.ndarray
    u0: np.ndarray
    rule: QuadratureRule = QuadratureRule.LEFT_RECTANGLE
    weights: Optional[np.ndarray] = None
    kind: HistoryKind = HistoryKind.NORMAL_DISPLACEMENT

    def __post_init__(self):
        lmap = np.atleast_2d(np.asarray(self.linear_map, dtype=float))
        u0 = np.asarray(self.u0, dtype=float).reshape(-1)
        if lmap.shape[1] != u0.shape[0]:
            raise HistoryConfigError("linear map and u0 disagree in dimension")
        object.__setattr__(self, "linear_map", lmap)
        object.__setattr__(self, "u0", u0)
        object.__setattr__(self, "rule", QuadratureRule(self.rule))
        object.__setattr__(self, "kind", HistoryKind(self.kind))
        object.__setattr__(self, "weights", _weights(self.weights, lmap.shape[0]))

    @property
    def output_weights(self):
        return self.weights

    def evaluate(self, samples, grid, n):
        samples = np.asarray(samples, dtype=float)
        self._check(samples, grid, n, self.u0.shape[0])
        return self.linear_map @ displacements(samples, grid.dt, self.u0, n, self.rule)[n]

    def evaluate_all(self, samples, grid):
        samples = np.asarray(samples, dtype=float)
        self._check(samples, grid, 0, self.u0.shape[0])
        return displacements(samples, grid.dt, self.u0, grid.N, self.rule) @ self.linear_map.T


@dataclass(frozen=True, eq=False)
class SlipNormalHistory(HistoryOperator):
    """Pair (accumulated slip on one boundary part, normal displacement on another).

    slip_n = quadrature over [0, t_n] of |T (I w)(s)| per node, with T the
    tangential component map; normal_n = N (I w)(t_n). Both levels use the
    same rule; the inner integral comes from prefix sums.
    """

    tangential_map: np.ndarray
    normal_map: np.ndarray
    u0: np.ndarray
    rule: QuadratureRule = QuadratureRule.LEFT_RECTANGLE
    slip_weights: Optional[np.ndarray] = None
    normal_weights: Optional[np.ndarray] = None
    kind: HistoryKind = field(default=HistoryKind.SLIP_AND_NORMAL, init=False)

    def __post_init__(self):
        tmap = np.atleast_2d(np.asarray(self.tangential_map, dtype=float))
        nmap = np.atleast_2d(np.asarray(self.normal_map, dtype=float))
        u0 = np.asarray(self.u0, dtype=float).reshape(-1)
        if tmap.shape[1] != u0.shape[0] or nmap.shape[1] != u0.shape[0]:
            raise HistoryConfigError("slip/normal maps and u0 disagree in dimension")
        object.__setattr__(self, "tangential_map", tmap)
        object.__setattr__(self, "normal_map", nmap)
        object.__setattr__(self, "u0", u0)
        object.__setattr__(self, "rule", QuadratureRule(self.rule))
        object.__setattr__(self, "slip_weights", _weights(self.slip_weights, tmap.shape[0]))
        object.__setattr__(self, "normal_weights", _weights(self.normal_weights, nmap.shape[0]))

    @property
    def slip_dim(self) -> int:
        return self.tangential_map.shape[0]

    @property
    def output_weights(self):
        return np.concatenate([self.slip_weights, self.normal_weights])

    def split(self, value: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        value = np.asarray(value)
        return value[..., : self.slip_dim], value[..., self.slip_dim :]

    def evaluate(self, samples, grid, n):
        samples = np.asarray(samples, dtype=float)
        self._check(samples, grid, n, self.u0.shape[0])
        u = displacements(samples, grid.dt, self.u0, n, self.rule)
        tangential = np.abs(u @ self.tangential_map.T)
        slip = grid.weights(n, self.rule) @ tangential
        return np.concatenate([slip, self.normal_map @ u[n]])

    def evaluate_all(self, samples, grid):
        samples = np.asarray(samples, dtype=float)
        self._check(samples, grid, 0, self.u0.shape[0])
        u = displacements(samples, grid.dt, self.u0, grid.N, self.rule)
        slip = cumulative_quadrature(np.abs(u @ self.tangential_map.T), grid.dt, self.rule)
        return np.hstack([slip, u @ self.normal_map.T])


def eval_history(op: HistoryOperator, traj: Trajectory, n: int) -> np.ndarray:
    """State of `op` at node n of the trajectory."""
    return op.evaluate(traj.samples, traj.grid, n)


# ---------------------------------------------------------------------------
# Bundle of R1..R4 and the states they produce
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class HistoryStates:
    """States (lam, xi, eta, zeta) at every grid node, each (N+1, k)."""

    lam: np.ndarray
    xi: np.ndarray
    eta: np.ndarray
    zeta: np.ndarray

    def at(self, n: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return self.lam[n], self.xi[n], self.eta[n], self.zeta[n]

    def shifted(self, other: "HistoryStates", scale: float = 1.0) -> "HistoryStates":
        return HistoryStates(
            self.lam + scale * other.lam,
            self.xi + scale * other.xi,
            self.eta + scale * other.eta,
            self.zeta + scale * other.zeta,
        )

    def scaled(self, factor: float) -> "HistoryStates":
        return HistoryStates(
            factor * self.lam, factor * self.xi, factor * self.eta, factor * self.zeta
        )


@dataclass(frozen=True, eq=False)
class HistoryBundle:
    """History operators feeding A (R1), f (R2), phi (R3) and j (R4)."""

    R1: HistoryOperator
    R2: HistoryOperator
    R3: HistoryOperator
    R4: HistoryOperator

    def __post_init__(self):
        rules = {op.rule for op in self.operators}
        if len(rules) != 1:
            raise HistoryConfigError(f"history operators mix quadrature rules: {rules}")

    @property
    def operators(self) -> List[HistoryOperator]:
        return [self.R1, self.R2, self.R3, self.R4]

    @property
    def rule(self) -> QuadratureRule:
        return self.R1.rule

    @property
    def dims(self) -> Tuple[int, int, int, int]:
        return tuple(op.output_dim for op in self.operators)

    def states_at(self, samples: np.ndarray, grid: TimeGrid, n: int):
        return tuple(op.evaluate(samples, grid, n) for op in self.operators)

    def states(self, samples: np.ndarray, grid: TimeGrid) -> HistoryStates:
        return HistoryStates(*(op.evaluate_all(samples, grid) for op in self.operators))

    def zero_states(self, grid: TimeGrid) -> HistoryStates:
        return HistoryStates(*(np.zeros((grid.N + 1, d)) for d in self.dims))

    def states_distance(self, a: HistoryStates, b: HistoryStates, grid: TimeGrid) -> float:
        """Sum of the discrete L2(0, T) distances of the four components."""
        total = 0.0
        for op, x, y in zip(self.operators, (a.lam, a.xi, a.eta, a.zeta), (b.lam, b.xi, b.eta, b.zeta)):
            if op.output_dim:
                total += l2_norm(x - y, grid, self.rule, weights=op.output_weights)
        return total


# ---------------------------------------------------------------------------
# Audit of the discrete history Lipschitz bound
# ---------------------------------------------------------------------------


@dataclass
class HistoryLipschitzReport:
    kind: str
    claimed: float
    max_quotient: float
    worst_pair: Optional[int]
    worst_node: Optional[int]
    skipped_nodes: int
    evaluated_nodes: int
    passed: bool

    def to_dict(self) -> Dict:
        return {
            "kind": self.kind,
            "claimed": self.claimed,
            "max_quotient": self.max_quotient,
            "worst_pair": self.worst_pair,
            "worst_node": self.worst_node,
            "skipped_nodes": self.skipped_nodes,
            "evaluated_nodes": self.evaluated_nodes,
            "passed": self.passed,
        }


def audit_history_lipschitz(
    op: HistoryOperator,
    pairs: Iterable[Tuple[Trajectory, Trajectory]],
    claimed: float,
    metric: Optional[EnergyMetric] = None,
) -> HistoryLipschitzReport:
    """max over pairs and nodes of |R v1 - R v2|(t_n) / int_0^{t_n} |v1 - v2|."""
    worst, worst_pair, worst_node = 0.0, None, None
    skipped = evaluated = 0
    for p, (a, b) in enumerate(pairs):
        if a.grid != b.grid:
            raise HistoryConfigError("trajectory pair does not share a grid")
        grid = a.grid
        diff_norms = spatial_norms(a.samples - b.samples, metric)
        denominators = cumulative_quadrature(diff_norms, grid.dt, op.rule)
        ra = op.evaluate_all(a.samples, grid)
        rb = op.evaluate_all(b.samples, grid)
        for n in range(grid.N + 1):
            if denominators[n] <= 0.0:
                skipped += 1
                continue
            evaluated += 1
            q = op.output_norm(ra[n] - rb[n]) / denominators[n]
            if q > worst:
                worst, worst_pair, worst_node = q, p, n
    passed = worst <= claimed * (1.0 + 1e-6)
    if skipped:
        logger.debug(f"{op.kind.value}: skipped {skipped} nodes with zero denominator")
    return HistoryLipschitzReport(
        op.kind.value, float(claimed), float(worst), worst_pair, worst_node, skipped, evaluated, passed
    )
