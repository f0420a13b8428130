"""
Scalar and low-dimensional problem instances with known answers.

    scalar-basic        2w = 1 on {w <= 10}                -> w = 0.5
    scalar-constrained  2w = 30 on {w <= 10}               -> w = 10
    scalar-soft         w - 2 + d|w| contains 0            -> w = 1
    scalar-ode          w(t) + int_0^t w = 1               -> w = exp(-t)
    coupled-4d          every ingredient active at once (no closed form)
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from .core.errors import ScenarioError
from .core.potentials import (
    PrototypePotential,
    SaturatingAlpha,
    WeightedAbsPotential,
    ZeroLipschitzPotential,
    ZeroPotential,
    damped_response,
)
from .core.problem import AbstractProblem, AffineLoad, AffineOperator, HypothesisConstants
from .core.spaces import ConstraintSet, EnergyMetric, TraceOperator
from .history.grid import TimeGrid, l2_norm
from .history.operators import (
    DisplacementHistory,
    ExponentialKernel,
    HistoryBundle,
    HistoryKind,
    HistoryStates,
    VolterraHistory,
    ZeroHistory,
)
from .solvers.elliptic import FrozenData, SolveConfig, generate_probes, minty_residual, solve_frozen
from .solvers.evolution import EvolutionConfig, stability_ratio, time_march

logger = logging.getLogger(__name__)


def _no_histories() -> HistoryBundle:
    zero = ZeroHistory(0)
    return HistoryBundle(zero, zero, zero, zero)


def _scalar(name: str, a: float, f: float, cap: Optional[float], soft: float = 0.0) -> AbstractProblem:
    k = ConstraintSet.whole_space(1) if cap is None else ConstraintSet.upper_bound(1, [0], cap)
    phi = WeightedAbsPotential(k, np.array([soft])) if soft else ZeroPotential(k)
    return AbstractProblem(
        name=name,
        metric=EnergyMetric.identity(1),
        trace=TraceOperator(np.zeros((0, 1))),
        constraint=k,
        operator=AffineOperator(np.array([[a]])),
        load=AffineLoad(np.array([f])),
        phi=phi,
        j=ZeroLipschitzPotential(0),
        histories=_no_histories(),
        constants=HypothesisConstants(m_A=a, a2=a, c_phi1_max=soft),
        scale=max(abs(f), 1.0),
    )


def scalar_basic() -> AbstractProblem:
    return _scalar("scalar-basic", 2.0, 1.0, 10.0)


def scalar_constrained() -> AbstractProblem:
    return _scalar("scalar-constrained", 2.0, 30.0, 10.0)


def scalar_soft(load: float = 2.0) -> AbstractProblem:
    return _scalar("scalar-soft", 1.0, load, None, soft=1.0)


def scalar_ode(horizon: float = 1.0) -> AbstractProblem:
    """A(t, lam, w) = w + lam with lam = int_0^t w and f = 1."""
    k = ConstraintSet.whole_space(1)
    zero = ZeroHistory(0)
    memory = VolterraHistory(np.array([[1.0]]), None, None, np.zeros(1))
    return AbstractProblem(
        name="scalar-ode",
        metric=EnergyMetric.identity(1),
        trace=TraceOperator(np.zeros((0, 1))),
        constraint=k,
        operator=AffineOperator(np.array([[1.0]]), coupling=np.array([[1.0]])),
        load=AffineLoad(np.array([1.0])),
        phi=ZeroPotential(k),
        j=ZeroLipschitzPotential(0),
        histories=HistoryBundle(memory, zero, zero, zero),
        constants=HypothesisConstants(m_A=1.0, m_A_bar=1.0, a1=1.0, a2=1.0, c_R1=1.0),
        horizon=horizon,
    )


COUPLED_EIGENVALUES = np.array([3.0, 4.0, 5.0, 6.0])


def coupled_4d(alpha_scale: float = 0.5, horizon: float = 1.0) -> AbstractProblem:
    """Four DoFs with memory, history-dependent load, solution-dependent friction and a nonmonotone j."""
    q, _ = np.linalg.qr(np.random.default_rng(7).standard_normal((4, 4)))
    stiffness = q @ np.diag(COUPLED_EIGENVALUES) @ q.T
    trace = TraceOperator(np.array([[0.6, 0.8, 0.0, 0.0], [0.0, 0.0, 0.8, -0.6]]))
    k = ConstraintSet.upper_bound(4, [0, 3], [0.4, 0.5])
    c_eta, c_w = 0.1, 0.05
    phi = WeightedAbsPotential(k, np.array([0.3, 0.2, 0.25, 0.2]), c_eta=c_eta, c_w=c_w)
    alpha = SaturatingAlpha(alpha_scale)
    j = PrototypePotential(damped_response(), alpha, np.ones(2))
    eye = np.eye(4)
    kernel = ExponentialKernel(0.3, 0.5)
    histories = HistoryBundle(
        R1=VolterraHistory(0.5 * eye, eye, kernel, np.zeros(4)),
        R2=DisplacementHistory(eye, np.zeros(4), kind=HistoryKind.CUSTOM),
        R3=DisplacementHistory(eye, np.zeros(4), kind=HistoryKind.CUSTOM),
        R4=DisplacementHistory(trace.matrix, np.zeros(4)),
    )
    load_coupling = 0.1
    constants = HypothesisConstants(
        m_A=float(COUPLED_EIGENVALUES.min()),
        m_A_bar=1.0,
        a1=1.0,
        a2=float(COUPLED_EIGENVALUES.max()),
        L_f=load_coupling,
        alpha_phi=c_w,
        beta_phi=c_eta,
        c0j_max=j.c0j,
        c2j=j.c2j,
        m_j=j.m_j,
        m_1=j.m_1,
        c_R1=0.5 + kernel.sup,
        c_R2=1.0,
        c_R3=1.0,
        c_R4=1.0,
        M_norm=1.0,
        c_phi1_max=float(np.linalg.norm(phi.base)) + c_eta * 2.0 + c_w * 2.0,
    )
    return AbstractProblem(
        name="coupled-4d",
        metric=EnergyMetric.identity(4),
        trace=trace,
        constraint=k,
        operator=AffineOperator(stiffness, coupling=eye),
        load=AffineLoad(lambda t: np.array([1.0, -0.5, 0.8, 0.3]) * (1.0 + t), coupling=load_coupling * eye),
        phi=phi,
        j=j,
        histories=histories,
        constants=constants,
        horizon=horizon,
    )


TOYS: Dict[str, Callable[[], AbstractProblem]] = {
    "scalar-basic": scalar_basic,
    "scalar-constrained": scalar_constrained,
    "scalar-soft": scalar_soft,
    "scalar-ode": scalar_ode,
    "coupled-4d": coupled_4d,
}


def get_toy(name: str) -> AbstractProblem:
    try:
        return TOYS[name]()
    except KeyError:
        raise ScenarioError(f"unknown toy instance {name!r}; available: {', '.join(TOYS)}") from None


@dataclass
class ToyResult:
    name: str
    solution: List[float]
    minty_min: float
    stability_ratio: Optional[float] = None
    stability_note: str = ""
    ode_errors: Dict[int, float] = field(default_factory=dict)

    @property
    def ode_ratios(self) -> List[float]:
        errs = [self.ode_errors[n] for n in sorted(self.ode_errors)]
        return [errs[k] / errs[k + 1] for k in range(len(errs) - 1) if errs[k + 1] > 0]

    def to_dict(self) -> Dict:
        return {
            "name": self.name,
            "solution": self.solution,
            "minty_min": self.minty_min,
            "stability_ratio": self.stability_ratio,
            "stability_note": self.stability_note,
            "ode_errors": {int(n): float(e) for n, e in self.ode_errors.items()},
            "ode_ratios": self.ode_ratios,
        }


def ode_error(steps: int, cfg: Optional[SolveConfig] = None) -> float:
    """L2(0, 1) error of the marched scalar-ode solution against exp(-t)."""
    p = scalar_ode()
    grid = TimeGrid(1.0, steps)
    run = time_march(p, EvolutionConfig(grid, cfg or SolveConfig(), workers=1))
    return l2_norm(run.trajectory.samples[:, 0] - np.exp(-grid.nodes), grid)


def run_toy(
    name: str,
    seed: int = 0,
    cfg: Optional[SolveConfig] = None,
    ode_steps=(100, 200),
    workers: int = 1,
) -> ToyResult:
    """Frozen solve at t = 0, its Minty certificate, and a stability check."""
    p = get_toy(name)
    cfg = cfg or SolveConfig()
    d = FrozenData.zeros(p)
    sol = solve_frozen(p, d, cfg)
    minty = minty_residual(p, d, sol.w, generate_probes(p, sol.w, 200, seed), workers=workers)
    result = ToyResult(name, sol.w.to_list(), minty.min_value)

    grid = TimeGrid(p.horizon, 10)
    evo = EvolutionConfig(grid, cfg, workers=workers)
    rng = np.random.default_rng(seed)
    dims = p.histories.dims
    perturb = HistoryStates(*(0.1 * p.scale * rng.standard_normal((grid.N + 1, n)) for n in dims))
    stab = stability_ratio(p, evo, perturb)
    result.stability_ratio = None if stab.skipped else stab.ratio
    result.stability_note = stab.note

    if name == "scalar-ode":
        result.ode_errors = {n: ode_error(n, cfg) for n in ode_steps}
    logger.info(f"toy {name}: w={result.solution} minty min={result.minty_min:.3e}")
    return result
