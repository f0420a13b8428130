"""
Abstract problem bundle (A, f, phi, j, M, K, R1..R4) and its hypothesis
constants.
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np

from ..history.operators import HistoryBundle
from .errors import DimensionError
from .potentials import ConvexPotential, LipschitzPotential, PrototypePotential, ScalarPotential
from .spaces import ConstraintSet, EnergyMetric, TraceOperator, as_array

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class HypothesisConstants:
    """Constants of the hypothesis blocks attached to one problem instance."""

    m_A: float
    m_A_bar: float = 0.0
    a0_max: float = 0.0
    a1: float = 0.0
    a2: float = 0.0
    L_f: float = 0.0
    alpha_phi: float = 0.0
    beta_phi: float = 0.0
    c0j_max: float = 0.0
    c1j: float = 0.0
    c2j: float = 0.0
    m_j: float = 0.0
    m_1: float = 0.0
    c_R1: float = 0.0
    c_R2: float = 0.0
    c_R3: float = 0.0
    c_R4: float = 0.0
    M_norm: float = 0.0
    # growth of phi in (w, eta): phi(v1) - phi(v2) <= (c_phi1 + c_phi2*|w| + c_phi3*|eta|)|v1 - v2|
    c_phi1_max: float = 0.0
    c_phi2: float = 0.0
    c_phi3: float = 0.0

    def __post_init__(self):
        if not self.m_A > 0:
            raise ValueError(f"m_A must be positive, got {self.m_A}")
        for f in fields(self):
            value = getattr(self, f.name)
            if not np.isfinite(value) or value < 0:
                raise ValueError(f"constant {f.name} must be finite and nonnegative, got {value}")

    @property
    def margin(self) -> float:
        return smallness_margin(self)

    def to_dict(self) -> Dict[str, float]:
        return {k: float(v) for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, data: Dict[str, float]) -> "HypothesisConstants":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown constants: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})


def smallness_margin(h: HypothesisConstants) -> float:
    """m_A - m_j*||M||^2 - alpha_phi; positive means the smallness condition holds."""
    return h.m_A - h.m_j * h.M_norm**2 - h.alpha_phi


# ---------------------------------------------------------------------------
# Operator A and load f
# ---------------------------------------------------------------------------


class OperatorA(ABC):
    """A(t, lam, v) returned as a dual (residual) vector."""

    @abstractmethod
    def eval(self, t: float, lam: np.ndarray, v: np.ndarray) -> np.ndarray:
        ...

    @property
    def stiffness(self) -> Optional[np.ndarray]:
        """Matrix S when A(t, lam, v) = S v + A(t, lam, 0); None otherwise."""
        return None


@dataclass(frozen=True, eq=False)
class AffineOperator(OperatorA):
    """A(t, lam, v) = S v + C lam."""

    matrix: np.ndarray
    coupling: Optional[np.ndarray] = None

    def __post_init__(self):
        s = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        if s.shape[0] != s.shape[1]:
            raise DimensionError("operator matrix must be square")
        object.__setattr__(self, "matrix", s)
        if self.coupling is not None:
            c = np.atleast_2d(np.asarray(self.coupling, dtype=float))
            if c.shape[0] != s.shape[0]:
                raise DimensionError("history coupling rows must match the DoF dimension")
            object.__setattr__(self, "coupling", c)

    @property
    def stiffness(self):
        return self.matrix

    def eval(self, t, lam, v):
        out = self.matrix @ as_array(v)
        if self.coupling is not None and self.coupling.shape[1]:
            out = out + self.coupling @ as_array(lam)
        return out


class LoadFunctional(ABC):
    """f(t, xi) as a dual vector."""

    @abstractmethod
    def __call__(self, t: float, xi: np.ndarray) -> np.ndarray:
        ...


@dataclass(frozen=True, eq=False)
class AffineLoad(LoadFunctional):
    """f(t, xi) = base(t) + F xi; base is a fixed vector or a callable of t."""

    base: Union[np.ndarray, Callable[[float], np.ndarray]]
    coupling: Optional[np.ndarray] = None

    def __call__(self, t, xi):
        out = np.array(self.base(t) if callable(self.base) else self.base, dtype=float).reshape(-1)
        if self.coupling is not None:
            out = out + np.atleast_2d(self.coupling) @ as_array(xi)
        return out


# ---------------------------------------------------------------------------
# Problem bundle
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AbstractProblem:
    """Data of the history-dependent inequality on a Galerkin space."""

    name: str
    metric: EnergyMetric
    trace: TraceOperator
    constraint: ConstraintSet
    operator: OperatorA
    load: LoadFunctional
    phi: ConvexPotential
    j: LipschitzPotential
    histories: HistoryBundle
    constants: HypothesisConstants
    horizon: float = 1.0
    scale: float = 1.0
    metadata: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        n = self.metric.dim
        if self.trace.dim != n or self.constraint.dim != n:
            raise DimensionError(
                f"inconsistent dimensions: metric {n}, trace {self.trace.dim}, "
                f"constraint {self.constraint.dim}"
            )
        if self.phi.constraint is not self.constraint:
            raise ValueError("phi must carry the problem's constraint set")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")

    @property
    def dim(self) -> int:
        return self.metric.dim

    @property
    def margin(self) -> float:
        return smallness_margin(self.constants)


def j0_prototype(pot: PrototypePotential, t: float, zeta, x, d) -> float:
    """alpha(t, zeta) * sum_i w_i g°(x_i; d_i)."""
    return pot.dir_deriv(t, zeta, x, d)


@dataclass(frozen=True)
class RelaxedMonotonicityReport:
    m_g: float
    min_quotient: float
    witness: Optional[Tuple[float, float]]
    sample_count: int
    passed: bool

    def to_dict(self) -> Dict:
        return {
            "m_g": self.m_g,
            "min_quotient": self.min_quotient,
            "witness": list(self.witness) if self.witness is not None else None,
            "sample_count": self.sample_count,
            "passed": self.passed,
        }


def check_relaxed_monotonicity(
    pot: Union[PrototypePotential, ScalarPotential],
    sample_count: int = 121,
    radius: float = 3.0,
    m_g: Optional[float] = None,
) -> RelaxedMonotonicityReport:
    """Scan all grid pairs on [-radius, radius]^2 for
    (dg(r1) - dg(r2))(r1 - r2) + m_g (r1 - r2)^2 >= 0."""
    if sample_count < 1:
        raise ValueError("sample_count must be at least 1")
    g = pot.g if isinstance(pot, PrototypePotential) else pot
    claimed = g.m_g if m_g is None else float(m_g)
    grid = np.linspace(-radius, radius, sample_count)
    i, k = np.triu_indices(sample_count, k=1)
    if i.size == 0:
        return RelaxedMonotonicityReport(claimed, 0.0, None, sample_count, True)
    slopes = g.derivative(grid)
    diff = grid[i] - grid[k]
    quotient = (slopes[i] - slopes[k]) * diff + claimed * diff**2
    worst = int(np.argmin(quotient))
    min_q = float(quotient[worst])
    tol = 1e-12 * max(1.0, radius**2)
    passed = min_q >= -tol
    witness = (float(grid[i[worst]]), float(grid[k[worst]]))
    if not passed:
        logger.info(f"Relaxed monotonicity with m_g={claimed} fails at {witness}: {min_q:.3e}")
    return RelaxedMonotonicityReport(claimed, min_q, witness, sample_count, passed)
