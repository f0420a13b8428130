"""
Potentials entering the inequality.

ConvexPotential is the (possibly solution-dependent) convex part phi,
handled through its proximal map. LipschitzPotential is the nonconvex part j
on boundary samples, handled through Clarke directional derivatives and a
fixed subgradient selection. Scalar prototypes g and coefficient laws alpha
build the concrete j = alpha(t, zeta) * g(x) used by every shipped instance.
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .spaces import ConstraintSet, as_array

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Scalar prototypes g
# ---------------------------------------------------------------------------


class ScalarPotential(ABC):
    """Locally Lipschitz g: R -> R with bounded generalized derivative.

    Declared constants: |dg(r)| <= c0 + c1*|r| and relaxed monotonicity
    (dg(r1) - dg(r2))(r1 - r2) >= -m_g (r1 - r2)^2.
    """

    c0: float
    c1: float
    m_g: float

    @abstractmethod
    def value(self, r: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def derivative(self, r: np.ndarray) -> np.ndarray:
        """Right-limit element of the Clarke subdifferential."""

    @abstractmethod
    def clarke_dd(self, r: np.ndarray, d: np.ndarray) -> np.ndarray:
        """g°(r; d), elementwise."""


class PiecewiseLinearSlope(ScalarPotential):
    """g with continuous piecewise-linear derivative beta (so g is C^1).

    beta interpolates (knots, values) and continues linearly outside with
    left_slope / right_slope. g(0) = 0.
    """

    def __init__(self, knots, values, left_slope: float = 0.0, right_slope: float = 0.0):
        self.knots = np.asarray(knots, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if self.knots.ndim != 1 or self.knots.shape != self.values.shape or self.knots.size < 1:
            raise ValueError("knots and values must be matching 1D arrays")
        if np.any(np.diff(self.knots) <= 0):
            raise ValueError("knots must be strictly increasing")
        self.left_slope = float(left_slope)
        self.right_slope = float(right_slope)

        slopes = [self.left_slope, self.right_slope]
        if self.knots.size > 1:
            slopes.extend(np.diff(self.values) / np.diff(self.knots))
        self.min_slope = float(min(slopes))
        self.m_g = max(0.0, -self.min_slope)
        self.c1 = max(abs(self.left_slope), abs(self.right_slope))
        self.c0 = float(np.max(np.abs(self.values)) + self.c1 * np.max(np.abs(self.knots)))
        logger.debug(f"Slope law on {self.knots.size} knots: m_g={self.m_g:.3g} c0={self.c0:.3g} c1={self.c1:.3g}")
        # antiderivative of beta at the knots, shifted so that g(0) = 0
        steps = np.diff(self.knots) * (self.values[1:] + self.values[:-1]) / 2.0
        self._at_knots = np.concatenate([[0.0], np.cumsum(steps)])
        self._offset = 0.0
        self._offset = float(self._antiderivative(np.zeros(1))[0])

    def derivative(self, r):
        r = np.asarray(r, dtype=float)
        beta = np.interp(r, self.knots, self.values)
        beta = np.where(r < self.knots[0], self.values[0] + self.left_slope * (r - self.knots[0]), beta)
        beta = np.where(
            r > self.knots[-1], self.values[-1] + self.right_slope * (r - self.knots[-1]), beta
        )
        return beta

    def _antiderivative(self, r):
        r = np.asarray(r, dtype=float)
        beta = self.derivative(r)
        idx = np.clip(np.searchsorted(self.knots, r, side="right") - 1, 0, self.knots.size - 1)
        anchor = self.knots[idx]
        out = self._at_knots[idx] + (r - anchor) * (self.values[idx] + beta) / 2.0
        return out - self._offset

    def value(self, r):
        return self._antiderivative(r)

    def clarke_dd(self, r, d):
        return self.derivative(r) * np.asarray(d, dtype=float)


def damped_response() -> PiecewiseLinearSlope:
    """Default normal damped-response law: beta = 0, 2r, 3 - r, 1 on the
    pieces (-inf, 0], [0, 1], [1, 2], [2, inf)."""
    return PiecewiseLinearSlope([0.0, 1.0, 2.0], [0.0, 2.0, 1.0])


def quadratic(coef: float) -> PiecewiseLinearSlope:
    """g(r) = coef * r^2 / 2."""
    return PiecewiseLinearSlope([0.0], [0.0], left_slope=coef, right_slope=coef)


class AbsolutePotential(ScalarPotential):
    """g(r) = scale*|r|; the selection at the kink is the right limit."""

    def __init__(self, scale: float = 1.0):
        if scale < 0:
            raise ValueError("scale must be nonnegative")
        self.scale = float(scale)
        self.c0 = self.scale
        self.c1 = 0.0
        self.m_g = 0.0

    def value(self, r):
        return self.scale * np.abs(np.asarray(r, dtype=float))

    def derivative(self, r):
        return np.where(np.asarray(r, dtype=float) >= 0.0, self.scale, -self.scale)

    def clarke_dd(self, r, d):
        r = np.asarray(r, dtype=float)
        d = np.asarray(d, dtype=float)
        return np.where(r == 0.0, self.scale * np.abs(d), self.scale * np.sign(r) * d)


# ---------------------------------------------------------------------------
# Coefficient laws alpha(t, zeta)
# ---------------------------------------------------------------------------


class AlphaLaw(ABC):
    """alpha(t, zeta) in [0, upper], Lipschitz in zeta with `lipschitz`."""

    upper: float
    lipschitz: float

    @abstractmethod
    def __call__(self, t: float, zeta: np.ndarray) -> np.ndarray:
        ...


@dataclass(frozen=True)
class ConstantAlpha(AlphaLaw):
    value: float = 1.0

    @property
    def upper(self) -> float:
        return self.value

    @property
    def lipschitz(self) -> float:
        return 0.0

    def __call__(self, t, zeta):
        return np.full(np.shape(zeta), self.value, dtype=float)


@dataclass(frozen=True)
class SaturatingAlpha(AlphaLaw):
    """alpha = a0 * (1 + tanh(zeta)) / 2."""

    a0: float = 1.0

    @property
    def upper(self) -> float:
        return self.a0

    @property
    def lipschitz(self) -> float:
        return self.a0 / 2.0

    def __call__(self, t, zeta):
        return self.a0 * (1.0 + np.tanh(np.asarray(zeta, dtype=float))) / 2.0


# ---------------------------------------------------------------------------
# Locally Lipschitz potentials j on X
# ---------------------------------------------------------------------------


class LipschitzPotential(ABC):
    """j(t, zeta, x) on boundary samples x in X."""

    @abstractmethod
    def value(self, t: float, zeta: np.ndarray, x: np.ndarray) -> float:
        ...

    @abstractmethod
    def dir_deriv(self, t: float, zeta: np.ndarray, x: np.ndarray, d: np.ndarray) -> float:
        """j°(t, zeta, x; d)."""

    @abstractmethod
    def subgrad_select(self, t: float, zeta: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Element of the Clarke subdifferential, as a vector paired in the X metric."""


@dataclass(frozen=True, eq=False)
class ZeroLipschitzPotential(LipschitzPotential):
    boundary_dim: int

    def value(self, t, zeta, x):
        return 0.0

    def dir_deriv(self, t, zeta, x, d):
        return 0.0

    def subgrad_select(self, t, zeta, x):
        return np.zeros(self.boundary_dim)


@dataclass(frozen=True, eq=False)
class PrototypePotential(LipschitzPotential):
    """j(t, zeta, x) = sum_i w_i alpha(t, zeta)_i g(x_i) with lumped weights w_i."""

    g: ScalarPotential
    alpha: AlphaLaw
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if np.any(w <= 0):
            raise ValueError("lumped weights must be positive")
        object.__setattr__(self, "weights", w)

    def _alpha(self, t, zeta) -> np.ndarray:
        a = np.broadcast_to(self.alpha(t, as_array(zeta)), self.weights.shape)
        return a

    def value(self, t, zeta, x):
        return float(np.sum(self.weights * self._alpha(t, zeta) * self.g.value(as_array(x))))

    def dir_deriv(self, t, zeta, x, d):
        local = self.g.clarke_dd(as_array(x), as_array(d))
        return float(np.sum(self.weights * self._alpha(t, zeta) * local))

    def subgrad_select(self, t, zeta, x):
        return self._alpha(t, zeta) * self.g.derivative(as_array(x))

    # growth and monotonicity constants of j in the X metric
    @property
    def m_j(self) -> float:
        return self.alpha.upper * self.g.m_g

    @property
    def c0j(self) -> float:
        return self.alpha.upper * self.g.c0 * float(np.sqrt(np.sum(self.weights)))

    @property
    def c2j(self) -> float:
        return self.alpha.upper * self.g.c1

    @property
    def m_1(self) -> float:
        if self.g.c1 > 0.0 and self.alpha.lipschitz > 0.0:
            logger.error(f"zeta-dependent alpha (lipschitz {self.alpha.lipschitz}) with unbounded slope c1={self.g.c1}")
            raise ValueError("m_1 needs a bounded derivative when alpha depends on zeta")
        return self.alpha.lipschitz * self.g.c0


# ---------------------------------------------------------------------------
# Convex potentials phi on V (with the indicator of K folded into prox)
# ---------------------------------------------------------------------------


class ConvexPotential(ABC):
    """phi(t, eta, w, v), convex in v, plus the indicator of `constraint`."""

    constraint: ConstraintSet

    @property
    def active_dofs(self) -> Optional[np.ndarray]:
        """DoFs on which prox can differ from the identity (None: all)."""
        return None

    @abstractmethod
    def value(self, t: float, eta: np.ndarray, w: np.ndarray, v: np.ndarray) -> float:
        ...

    def value_diff(self, t, eta, w, v1, v2) -> float:
        return self.value(t, eta, w, v1) - self.value(t, eta, w, v2)

    @abstractmethod
    def prox(self, t: float, eta: np.ndarray, w_frozen: np.ndarray, x: np.ndarray, rho: float) -> np.ndarray:
        """argmin_y 1/2|y - x|^2 + rho*phi(t, eta, w_frozen, y) + indicator_K(y)."""


@dataclass(frozen=True, eq=False)
class ZeroPotential(ConvexPotential):
    constraint: ConstraintSet

    @property
    def active_dofs(self):
        return np.asarray(self.constraint.indices, dtype=int)

    def value(self, t, eta, w, v):
        return 0.0

    def prox(self, t, eta, w_frozen, x, rho):
        return self.constraint.project(x)


@dataclass(frozen=True, eq=False)
class WeightedAbsPotential(ConvexPotential):
    """phi = sum_i (base_i + c_eta*tanh(eta_i) + c_w*tanh(w_i)) |v_i|.

    Needs base_i >= c_eta + c_w so every coefficient stays nonnegative.
    """

    constraint: ConstraintSet
    base: np.ndarray
    c_eta: float = 0.0
    c_w: float = 0.0

    def __post_init__(self):
        base = np.broadcast_to(np.asarray(self.base, dtype=float), (self.constraint.dim,)).copy()
        if np.any(base < self.c_eta + self.c_w) or self.c_eta < 0 or self.c_w < 0:
            raise ValueError("coefficients of the weighted absolute value must stay nonnegative")
        object.__setattr__(self, "base", base)

    def coefficients(self, eta, w) -> np.ndarray:
        coef = self.base.copy()
        if self.c_eta:
            coef += self.c_eta * np.tanh(as_array(eta))
        if self.c_w:
            coef += self.c_w * np.tanh(as_array(w))
        return coef

    def value(self, t, eta, w, v):
        return float(np.sum(self.coefficients(eta, w) * np.abs(as_array(v))))

    def prox(self, t, eta, w_frozen, x, rho):
        x = as_array(x)
        shrink = rho * self.coefficients(eta, w_frozen)
        y = np.sign(x) * np.maximum(np.abs(x) - shrink, 0.0)
        return self.constraint.project(y)
