"""
Frozen-data inequality solver.

For fixed (t, lam, xi, eta, zeta) the solver finds w in K with

    <A(t,lam,w) - f(t,xi), v - w> + phi(t,eta,w,v) - phi(t,eta,w,w)
        + j°(t, zeta, Mw; Mv - Mw) >= 0   for all v in K.

Outer loop: freeze z in dj(Mw) and the solution slot of phi. Inner loop:
forward-backward steps w <- prox(w - rho (A(w) - f + M* z)) in the lumped
metric. When A is affine the DoFs untouched by phi and K are eliminated
exactly, so the inner iteration only runs on boundary DoFs.
"""

import logging
import threading
import weakref
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from ..core.errors import (
    ConvergenceError,
    DimensionError,
    InfeasibleProbeError,
    SmallnessViolation,
    StepSizeError,
)
from ..core.problem import AbstractProblem, smallness_margin
from ..core.spaces import DofVector, apply_trace, apply_trace_adjoint, as_array

logger = logging.getLogger(__name__)

MAX_STEP_HALVINGS = 6
STEP_SAMPLES = 16


@dataclass(frozen=True, eq=False)
class FrozenData:
    """History states frozen at one time instant."""

    t: float
    lam: np.ndarray
    xi: np.ndarray
    eta: np.ndarray
    zeta: np.ndarray

    def __post_init__(self):
        for name in ("lam", "xi", "eta", "zeta"):
            arr = np.asarray(getattr(self, name), dtype=float).reshape(-1)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"frozen state {name} has non-finite entries")
            object.__setattr__(self, name, arr)
        if not np.isfinite(self.t):
            raise ValueError("frozen time must be finite")

    @classmethod
    def zeros(cls, p: AbstractProblem, t: float = 0.0) -> "FrozenData":
        e, x, y, z = p.histories.dims
        return cls(t, np.zeros(e), np.zeros(x), np.zeros(y), np.zeros(z))

    def check(self, p: AbstractProblem):
        expected = p.histories.dims
        actual = (self.lam.size, self.xi.size, self.eta.size, self.zeta.size)
        if expected != actual:
            raise DimensionError(f"frozen state dimensions {actual}, problem expects {expected}")


@dataclass
class SolveConfig:
    """Frozen-solve settings; step None selects the automatic step."""

    step: Optional[float] = None
    inner_tol: float = 1e-10
    outer_tol: float = 1e-10
    max_inner: int = 20000
    max_outer: int = 200
    divergence_factor: float = 1e4
    accelerate: bool = True

    def __post_init__(self):
        if self.step is not None and not self.step > 0:
            raise ValueError("step must be positive")
        if not (self.inner_tol > 0 and self.outer_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_inner < 1 or self.max_outer < 1:
            raise ValueError("iteration caps must be positive")
        if not self.divergence_factor > 1:
            raise ValueError("divergence_factor must exceed 1")

    def to_dict(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Optional[Dict]) -> "SolveConfig":
        data = dict(data or {})
        unknown = set(data) - {f.name for f in fields(cls)}
        if unknown:
            raise ValueError(f"unknown solver settings: {sorted(unknown)}")
        return cls(**data)


@dataclass
class FrozenSolution:
    w: DofVector
    iterations: int
    inner_iterations: int
    residual: float
    step: float
    outer_differences: List[float] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return {
            "iterations": self.iterations,
            "inner_iterations": self.inner_iterations,
            "residual": self.residual,
            "step": self.step,
        }


class _Diverged(Exception):
    def __init__(self, history):
        super().__init__("diverged")
        self.history = history


# ---------------------------------------------------------------------------
# Per-problem plan: DoF splitting and automatic step
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class _Plan:
    auto_step: float
    symmetric: bool
    active: Optional[np.ndarray] = None
    interior: Optional[np.ndarray] = None
    schur: Optional[np.ndarray] = None
    interior_lu: Optional[tuple] = None
    coupling_ib: Optional[np.ndarray] = None
    coupling_bi: Optional[np.ndarray] = None

    @property
    def condensed(self) -> bool:
        return self.active is not None


_PLANS: "weakref.WeakKeyDictionary[AbstractProblem, _Plan]" = weakref.WeakKeyDictionary()
_PLANS_LOCK = threading.Lock()


def _plan(p: AbstractProblem) -> _Plan:
    with _PLANS_LOCK:
        plan = _PLANS.get(p)
        if plan is None:
            plan = _build_plan(p)
            _PLANS[p] = plan
        return plan


def default_step(p: AbstractProblem) -> float:
    """Step rho the solver picks for `p` when SolveConfig.step is None."""
    return _plan(p).auto_step


def _step_from_matrix(mat: np.ndarray) -> Tuple[float, bool]:
    if mat.size == 0:
        return 1.0, True
    scale = max(1.0, float(np.max(np.abs(mat))))
    symmetric = bool(np.allclose(mat, mat.T, rtol=0.0, atol=1e-12 * scale))
    if symmetric:
        top = float(np.max(linalg.eigvalsh(mat)))
        return (1.0 / top if top > 0 else 1.0), True
    sym = (mat + mat.T) / 2.0
    m = float(np.min(linalg.eigvalsh(sym)))
    lip = float(np.linalg.norm(mat, 2))
    return m / lip**2, False


def _build_plan(p: AbstractProblem) -> _Plan:
    stiffness = p.operator.stiffness
    if stiffness is None:
        rng = np.random.default_rng(0)
        lam = np.zeros(p.histories.dims[0])
        m_est, l_est = np.inf, 0.0
        for _ in range(STEP_SAMPLES):
            v1, v2 = rng.standard_normal((2, p.dim)) * p.scale
            dv = v1 - v2
            da = p.operator.eval(0.0, lam, v1) - p.operator.eval(0.0, lam, v2)
            m_est = min(m_est, float(da @ dv) / float(dv @ dv))
            l_est = max(l_est, float(np.linalg.norm(da)) / float(np.linalg.norm(dv)))
        if m_est <= 0:
            m_est = p.constants.m_A
        step = m_est / l_est**2 if l_est > 0 else 1.0
        logger.debug(f"{p.name}: sampled step {step:.3e} (m={m_est:.3e}, L={l_est:.3e})")
        return _Plan(auto_step=step, symmetric=False)

    active = p.phi.active_dofs
    active = np.arange(p.dim) if active is None else np.unique(np.concatenate(
        [np.asarray(active, dtype=int), np.asarray(p.constraint.indices, dtype=int)]
    ))
    interior = np.setdiff1d(np.arange(p.dim), active)
    s = np.asarray(stiffness, dtype=float)
    s_bb = s[np.ix_(active, active)]
    lu = coupling_ib = coupling_bi = None
    schur = s_bb
    if interior.size:
        lu = linalg.lu_factor(s[np.ix_(interior, interior)])
        coupling_bi = s[np.ix_(active, interior)]
        coupling_ib = linalg.lu_solve(lu, s[np.ix_(interior, active)])
        schur = s_bb - coupling_bi @ coupling_ib
    step, symmetric = _step_from_matrix(schur)
    logger.debug(
        f"{p.name}: condensed onto {active.size} of {p.dim} DoFs, step {step:.3e}"
    )
    return _Plan(step, symmetric, active, interior, schur, lu, coupling_ib, coupling_bi)


# ---------------------------------------------------------------------------
# Residuals
# ---------------------------------------------------------------------------


def _forward_backward(p, d, w, w_frozen, shift, rho):
    grad = p.operator.eval(d.t, d.lam, w) - p.load(d.t, d.xi) + shift
    return p.phi.prox(d.t, d.eta, w_frozen, w - rho * grad, rho)


def fixed_point_residual(p: AbstractProblem, d: FrozenData, w, rho: float) -> float:
    """|w - prox(w - rho (A(w) - f + M* z))| with z = dj(Mw) and phi frozen at w."""
    w = as_array(w)
    z = p.j.subgrad_select(d.t, d.zeta, apply_trace(p.trace, w))
    shift = apply_trace_adjoint(p.trace, z)
    return float(np.linalg.norm(w - _forward_backward(p, d, w, w, shift, rho)))


# ---------------------------------------------------------------------------
# Inner iterations
# ---------------------------------------------------------------------------


def _momentum(x_new, x, y, tk):
    if np.dot(y - x_new, x_new - x) > 0:
        return x_new, 1.0
    t_next = (1.0 + np.sqrt(1.0 + 4.0 * tk * tk)) / 2.0
    return x_new + ((tk - 1.0) / t_next) * (x_new - x), t_next


def _iterate(step_fn, start, cfg: SolveConfig, accelerate: bool, stage: str):
    x = y = start
    tk = 1.0
    first = None
    history = []
    for it in range(1, cfg.max_inner + 1):
        x_new = step_fn(y)
        res = float(np.linalg.norm(x_new - y))
        history.append(res)
        if not np.isfinite(res) or (first is not None and res > cfg.divergence_factor * first):
            raise _Diverged(history)
        if first is None:
            first = max(res, np.finfo(float).tiny)
        if res <= cfg.inner_tol:
            return x_new, it
        if accelerate:
            y, tk = _momentum(x_new, x, y, tk)
        else:
            y = x_new
        x = x_new
    raise ConvergenceError(
        f"inner iteration did not reach {cfg.inner_tol:.1e} in {cfg.max_inner} steps",
        stage=stage,
        residual_history=history[-50:],
    )


def _inner_general(p, d, cfg, rho, w_frozen, shift, start, accelerate):
    def step_fn(y):
        return _forward_backward(p, d, y, w_frozen, shift, rho)

    return _iterate(step_fn, start, cfg, accelerate, "inner")


def _inner_condensed(p, d, cfg, rho, plan: _Plan, w_frozen, shift, start, accelerate):
    lam_zero = p.operator.eval(d.t, d.lam, np.zeros(p.dim))
    c = lam_zero - p.load(d.t, d.xi) + shift
    act, inner = plan.active, plan.interior
    c_b = c[act]
    y_i = None
    if inner.size:
        y_i = linalg.lu_solve(plan.interior_lu, c[inner])
        c_b = c_b - plan.coupling_bi @ y_i

    def assemble(w_b):
        full = np.empty(p.dim)
        full[act] = w_b
        if inner.size:
            full[inner] = -(y_i + plan.coupling_ib @ w_b)
        return full

    if act.size == 0:
        return assemble(np.zeros(0)), 0

    scratch = np.array(w_frozen, dtype=float)

    def step_fn(w_b):
        grad = plan.schur @ w_b + c_b
        scratch[act] = w_b - rho * grad
        return p.phi.prox(d.t, d.eta, w_frozen, scratch, rho)[act]

    w_b, its = _iterate(step_fn, np.asarray(start, dtype=float)[act], cfg, accelerate, "inner")
    return assemble(w_b), its


# ---------------------------------------------------------------------------
# Frozen solve
# ---------------------------------------------------------------------------


def solve_frozen(
    p: AbstractProblem,
    d: FrozenData,
    cfg: Optional[SolveConfig] = None,
    initial=None,
) -> FrozenSolution:
    """Solve the frozen-data inequality; refuses when the smallness margin is not positive."""
    cfg = cfg or SolveConfig()
    margin = smallness_margin(p.constants)
    if margin <= 0:
        raise SmallnessViolation(margin)
    d.check(p)
    plan = _plan(p)
    rho = cfg.step if cfg.step is not None else plan.auto_step
    halvings = 0
    while True:
        try:
            return _solve(p, d, cfg, plan, rho, initial)
        except _Diverged as exc:
            if cfg.step is not None or halvings == MAX_STEP_HALVINGS:
                raise StepSizeError(rho, exc.history[-50:]) from None
            logger.warning(f"{p.name}: residual diverged with rho={rho:.3e}, halving the step")
            rho /= 2.0
            halvings += 1


def _solve(p, d, cfg, plan, rho, initial) -> FrozenSolution:
    start = np.zeros(p.dim) if initial is None else as_array(initial)
    if start.shape[0] != p.dim:
        raise DimensionError(f"initial guess has dimension {start.shape[0]}, expected {p.dim}")
    w = p.constraint.project(start)
    accelerate = cfg.accelerate and plan.symmetric
    differences: List[float] = []
    inner_total = 0
    residual = np.inf
    for k in range(cfg.max_outer + 1):
        z = p.j.subgrad_select(d.t, d.zeta, apply_trace(p.trace, w))
        shift = apply_trace_adjoint(p.trace, z)
        residual = float(np.linalg.norm(w - _forward_backward(p, d, w, w, shift, rho)))
        if residual <= cfg.inner_tol and (not differences or differences[-1] <= cfg.outer_tol):
            return FrozenSolution(DofVector(w), k, inner_total, residual, rho, differences)
        if k == cfg.max_outer:
            break
        if plan.condensed:
            w_new, its = _inner_condensed(p, d, cfg, rho, plan, w, shift, w, accelerate)
        else:
            w_new, its = _inner_general(p, d, cfg, rho, w, shift, w, accelerate)
        inner_total += its
        differences.append(p.metric.norm(w_new - w))
        w = w_new
        if len(differences) > 2 and differences[-1] > cfg.divergence_factor * differences[0]:
            raise _Diverged(differences)
    raise ConvergenceError(
        f"outer iteration did not settle in {cfg.max_outer} sweeps (residual {residual:.3e})",
        stage="outer",
        residual_history=differences,
    )


# ---------------------------------------------------------------------------
# Certificates
# ---------------------------------------------------------------------------


@dataclass
class MintyReport:
    min_value: float
    worst_probe: Optional[int]
    worst_point: Optional[np.ndarray]
    probe_count: int

    def passed(self, tol: float) -> bool:
        return self.min_value >= -tol

    def to_dict(self) -> Dict:
        return {
            "min_value": self.min_value,
            "worst_probe": self.worst_probe,
            "probe_count": self.probe_count,
        }


def minty_term(p: AbstractProblem, d: FrozenData, w: np.ndarray, v: np.ndarray) -> float:
    mv, mw = apply_trace(p.trace, v), apply_trace(p.trace, w)
    residual = p.operator.eval(d.t, d.lam, v) - p.load(d.t, d.xi)
    return (
        float(residual @ (v - w))
        + p.phi.value_diff(d.t, d.eta, w, v, w)
        + p.j.dir_deriv(d.t, d.zeta, mv, mv - mw)
    )


def minty_residual(
    p: AbstractProblem,
    d: FrozenData,
    w,
    probes: Sequence,
    workers: int = 1,
) -> MintyReport:
    """min over probes v of the Minty expression at w."""
    w = as_array(w)
    if not p.constraint.contains(w, tol=1e-12):
        raise InfeasibleProbeError("candidate solution lies outside K")
    points = [as_array(v) for v in probes]
    for i, v in enumerate(points):
        if v.shape[0] != p.dim:
            raise DimensionError(f"probe {i} has dimension {v.shape[0]}, expected {p.dim}")
        if not p.constraint.contains(v):
            raise InfeasibleProbeError(f"probe {i} lies outside K")
    if not points:
        return MintyReport(np.inf, None, None, 0)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(lambda v: minty_term(p, d, w, v), points))
    else:
        values = [minty_term(p, d, w, v) for v in points]
    worst = int(np.argmin(values))
    return MintyReport(float(values[worst]), worst, points[worst], len(points))


def generate_probes(
    p: AbstractProblem,
    w,
    count: int = 200,
    seed: int = 0,
    radii: Sequence[float] = (0.1, 1.0, 10.0),
) -> List[np.ndarray]:
    """Projected Gaussian perturbations of w at several radii plus constraint-active corners."""
    w = as_array(w)
    rng = np.random.default_rng(seed)
    probes: List[np.ndarray] = []
    idx, caps = p.constraint.indices, p.constraint.active_values()
    if idx.size:
        corner = w.copy()
        corner[idx] = caps
        probes.append(corner)
        for k in range(min(idx.size, max(count // 10, 1))):
            single = w.copy()
            single[idx[k]] = caps[k]
            probes.append(single)
    probes = probes[:count]
    radii = [r * p.scale for r in radii]
    k = 0
    while len(probes) < count:
        direction = rng.standard_normal(p.dim)
        direction /= max(np.linalg.norm(direction), np.finfo(float).tiny)
        probes.append(p.constraint.project(w + radii[k % len(radii)] * direction))
        k += 1
    return probes


@dataclass
class AprioriBoundReport:
    lhs: float
    rhs: float
    passed: bool
    terms: Dict[str, float]

    def to_dict(self) -> Dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "passed": self.passed, "terms": dict(self.terms)}


def apriori_bound_check(
    p: AbstractProblem,
    d: FrozenData,
    w,
    v0,
    z0,
    xi0,
) -> AprioriBoundReport:
    """Check margin*|w - v0| against the explicit bound assembled from the constants."""
    w, v0, z0, xi0 = as_array(w), as_array(v0), as_array(z0), np.asarray(xi0, dtype=float).reshape(-1)
    if not p.constraint.contains(v0):
        raise InfeasibleProbeError("reference point v0 lies outside K")
    h = p.constants
    r1, r2, r3, r4 = p.histories.operators
    norm_v = p.metric.norm
    mn = h.M_norm
    terms = {
        "a0": h.a0_max,
        "load": p.metric.dual_norm(p.load(d.t, xi0)),
        "j_growth": mn * h.c0j_max,
        "phi_growth": h.c_phi1_max + h.c_phi2 * norm_v(z0) + h.c_phi3 * r3.output_norm(d.eta),
        "A_at_v0": h.a2 * norm_v(v0),
        "load_reference": h.L_f * r2.output_norm(xi0),
        "j_at_v0": h.c2j * mn**2 * norm_v(v0),
        "phi_reference": h.alpha_phi * norm_v(v0 - z0),
        "stress_state": h.a1 * r1.output_norm(d.lam),
        "load_state": h.L_f * r2.output_norm(d.xi),
        "j_state": h.c1j * mn * r4.output_norm(d.zeta),
    }
    rhs = float(sum(terms.values()))
    lhs = float(smallness_margin(h) * norm_v(w - v0))
    slack = 1e-10 * max(1.0, rhs)
    return AprioriBoundReport(lhs, rhs, lhs <= rhs + slack, terms)
