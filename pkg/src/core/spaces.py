"""
Finite-dimensional spaces: DoF vectors, the energy metric, the trace
operator onto boundary samples, and the nodewise constraint set.

Dual vectors (residuals) live in the same DoF coordinates and pair with
primal vectors through the plain dot product.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

import numpy as np
from scipy import linalg

from .errors import DimensionError, MetricError, OperatorNormError

logger = logging.getLogger(__name__)

ArrayLike = Union["DofVector", np.ndarray, list, float]

NORM_TOL = 1e-10
NORM_MAX_ITER = 10_000
NORM_CERTIFY_FACTOR = 1.0 + 1e-6


def as_array(v: ArrayLike) -> np.ndarray:
    """Plain float array view of a DofVector or array-like."""
    if isinstance(v, DofVector):
        return v.values
    return np.atleast_1d(np.asarray(v, dtype=float))


@dataclass(frozen=True, eq=False)
class DofVector:
    """Galerkin coefficients of an element of V (read-only)."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=float, copy=True).reshape(-1)
        if not np.all(np.isfinite(arr)):
            raise ValueError("DofVector entries must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    @classmethod
    def zeros(cls, dim: int) -> "DofVector":
        return cls(np.zeros(dim))

    def to_list(self) -> list:
        return self.values.tolist()


@dataclass(frozen=True, eq=False)
class EnergyMetric:
    """Discrete V-inner product (u, v)_V = u^T G v."""

    gram: np.ndarray
    _factor: tuple = field(init=False, repr=False)

    def __post_init__(self):
        gram = np.array(self.gram, dtype=float, copy=True)
        if gram.ndim != 2 or gram.shape[0] != gram.shape[1]:
            raise MetricError(f"Gram matrix must be square, got shape {gram.shape}")
        scale = max(1.0, float(np.max(np.abs(gram)))) if gram.size else 1.0
        if not np.allclose(gram, gram.T, rtol=0.0, atol=1e-12 * scale):
            raise MetricError("Gram matrix is not symmetric")
        try:
            factor = linalg.cho_factor(gram)
        except linalg.LinAlgError as e:
            raise MetricError(f"Gram matrix is not positive definite: {e}") from e
        gram.setflags(write=False)
        object.__setattr__(self, "gram", gram)
        object.__setattr__(self, "_factor", factor)

    @property
    def dim(self) -> int:
        return self.gram.shape[0]

    @classmethod
    def identity(cls, dim: int) -> "EnergyMetric":
        return cls(np.eye(dim))

    def _check(self, u: np.ndarray):
        if u.shape[-1] != self.dim:
            raise DimensionError(f"expected dimension {self.dim}, got {u.shape[-1]}")

    def inner(self, u: ArrayLike, v: ArrayLike) -> float:
        a, b = as_array(u), as_array(v)
        self._check(a)
        self._check(b)
        return float(a @ self.gram @ b)

    def norm(self, u: ArrayLike) -> float:
        return v_norm(u, self)

    def riesz(self, r: ArrayLike) -> np.ndarray:
        """Primal representative G^-1 r of a dual vector r."""
        arr = as_array(r)
        self._check(arr)
        return linalg.cho_solve(self._factor, arr)

    def dual_norm(self, r: ArrayLike) -> float:
        arr = as_array(r)
        return float(np.sqrt(max(arr @ self.riesz(arr), 0.0)))


@dataclass(frozen=True, eq=False)
class TraceOperator:
    """Linear map from DoF space to boundary samples X.

    X carries the lumped inner product <x, y>_X = sum_i weights[i] x_i y_i.
    """

    matrix: np.ndarray
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=float, copy=True)
        if mat.ndim != 2:
            raise DimensionError("trace matrix must be two-dimensional")
        w = np.ones(mat.shape[0]) if self.weights is None else np.array(self.weights, dtype=float)
        if w.shape != (mat.shape[0],) or np.any(w <= 0.0):
            raise DimensionError("trace weights must be positive, one per boundary sample")
        mat.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "weights", w)

    @property
    def boundary_dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def x_inner(self, x: ArrayLike, y: ArrayLike) -> float:
        return float(np.sum(self.weights * as_array(x) * as_array(y)))

    def x_norm(self, x: ArrayLike) -> float:
        return float(np.sqrt(self.x_inner(x, x)))


class ConstraintKind(str, Enum):
    WHOLE_SPACE = "whole-space"
    NODEWISE_UPPER_BOUND = "nodewise-upper-bound"


@dataclass(frozen=True, eq=False)
class ConstraintSet:
    """K = {v : s[i]*v[i] <= g[i] for constrained i}, or the whole space.

    The signs s are +1 or -1 so a cap on a normal component pointing along a
    negative axis is still a nodewise clip.
    """

    dim: int
    kind: ConstraintKind = ConstraintKind.WHOLE_SPACE
    indices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    bound: np.ndarray = field(default_factory=lambda: np.zeros(0))
    signs: Optional[np.ndarray] = None

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=int).reshape(-1)
        g = np.broadcast_to(np.asarray(self.bound, dtype=float), idx.shape).copy()
        if self.kind == ConstraintKind.WHOLE_SPACE and idx.size:
            raise ValueError("whole-space constraint takes no indices")
        if idx.size and (idx.min() < 0 or idx.max() >= self.dim):
            raise DimensionError("constrained index outside DoF range")
        if not np.all(np.isfinite(g)):
            raise ValueError("constraint bounds must be finite")
        s = np.ones(idx.shape) if self.signs is None else np.broadcast_to(
            np.asarray(self.signs, dtype=float), idx.shape
        ).copy()
        if not np.all(np.abs(s) == 1.0):
            raise ValueError("constraint signs must be +1 or -1")
        for arr in (idx, g, s):
            arr.setflags(write=False)
        object.__setattr__(self, "signs", s)
        object.__setattr__(self, "kind", ConstraintKind(self.kind))
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "bound", g)

    @classmethod
    def whole_space(cls, dim: int) -> "ConstraintSet":
        return cls(dim)

    @classmethod
    def upper_bound(cls, dim: int, indices, bound, signs=None) -> "ConstraintSet":
        return cls(dim, ConstraintKind.NODEWISE_UPPER_BOUND, indices, bound, signs)

    def active_values(self) -> np.ndarray:
        """Entries v[i] = s[i]*g[i] that put every constrained component on its cap."""
        return self.signs * self.bound

    def contains(self, v: ArrayLike, tol: float = 0.0) -> bool:
        arr = as_array(v)
        if arr.shape[0] != self.dim:
            raise DimensionError(f"expected dimension {self.dim}, got {arr.shape[0]}")
        return bool(np.all(self.signs * arr[self.indices] <= self.bound + tol))

    def project(self, v: ArrayLike) -> np.ndarray:
        """Array form of project_constraint, used inside solver loops."""
        arr = np.array(as_array(v), dtype=float, copy=True)
        if arr.shape[0] != self.dim:
            raise DimensionError(f"expected dimension {self.dim}, got {arr.shape[0]}")
        if self.kind == ConstraintKind.NODEWISE_UPPER_BOUND:
            s = self.signs
            arr[self.indices] = s * np.minimum(s * arr[self.indices], self.bound)
        return arr


def v_norm(u: ArrayLike, m: EnergyMetric) -> float:
    """sqrt(u^T G u)."""
    arr = as_array(u)
    if arr.shape[0] != m.dim:
        raise DimensionError(f"expected dimension {m.dim}, got {arr.shape[0]}")
    return float(np.sqrt(max(arr @ m.gram @ arr, 0.0)))


def project_constraint(v: ArrayLike, k: ConstraintSet) -> DofVector:
    """Lumped-metric projection onto K: clip constrained entries at g."""
    return DofVector(k.project(v))


def apply_trace(mop: TraceOperator, v: ArrayLike) -> np.ndarray:
    arr = as_array(v)
    if arr.shape[0] != mop.dim:
        raise DimensionError(f"trace expects dimension {mop.dim}, got {arr.shape[0]}")
    return mop.matrix @ arr


def apply_trace_adjoint(mop: TraceOperator, x: ArrayLike) -> np.ndarray:
    """M* x as a dual vector, so that <Mv, x>_X == v . (M* x)."""
    arr = as_array(x)
    if arr.shape[0] != mop.boundary_dim:
        raise DimensionError(
            f"adjoint expects boundary dimension {mop.boundary_dim}, got {arr.shape[0]}"
        )
    return mop.matrix.T @ (mop.weights * arr)


@dataclass(frozen=True, eq=False)
class OperatorNormEstimate:
    """Outcome of the power iteration for ||M|| in the V -> X metrics."""

    value: float
    iterations: int
    direction: np.ndarray

    @property
    def bound(self) -> float:
        """Certified upper bound used by smallness checks."""
        return self.value * NORM_CERTIFY_FACTOR


def power_iteration(
    mop: TraceOperator,
    m: EnergyMetric,
    tol: float = NORM_TOL,
    max_iter: int = NORM_MAX_ITER,
    seed: int = 0,
) -> OperatorNormEstimate:
    """Power iteration on G^-1 M^T W M; the Rayleigh quotient gives ||M||^2.

    The returned direction is a unit vector in V attaining the estimate.
    """
    if mop.dim != m.dim:
        raise DimensionError(f"trace dimension {mop.dim} != metric dimension {m.dim}")
    normal = mop.matrix.T @ (mop.weights[:, None] * mop.matrix)
    v = np.random.default_rng(seed).standard_normal(m.dim)
    v /= v_norm(v, m)
    best, best_vec = 0.0, v
    previous = -1.0
    for it in range(1, max_iter + 1):
        mv = normal @ v
        quotient = float(v @ mv)
        if quotient > best:
            best, best_vec = quotient, v
        if abs(quotient - previous) <= tol * max(abs(quotient), 1e-300) or quotient == 0.0:
            logger.debug(f"Operator norm converged after {it} iterations: {np.sqrt(best):.6e}")
            return OperatorNormEstimate(float(np.sqrt(best)), it, best_vec)
        previous = quotient
        y = m.riesz(mv)
        ny = v_norm(y, m)
        if ny == 0.0:
            return OperatorNormEstimate(0.0, it, best_vec)
        v = y / ny
    raise OperatorNormError(
        f"operator norm did not converge in {max_iter} iterations",
        last_estimate=float(np.sqrt(best)),
        last_iterate=v,
    )


def estimate_operator_norm(mop: TraceOperator, m: EnergyMetric, **kwargs) -> float:
    """||M|| = sup ||Mv||_X / ||v||_V by power iteration."""
    return power_iteration(mop, m, **kwargs).value
