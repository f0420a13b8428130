"""
Time-dependent solve on a grid: causal time marching, the global Picard
iteration on history states, and the stability/uniqueness harnesses.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core.errors import ConvergenceError, DimensionError, SmallnessViolation, StepSizeError
from ..core.problem import AbstractProblem, smallness_margin
from ..history.grid import (
    QuadratureRule,
    TimeGrid,
    Trajectory,
    l2_norm,
    refinement_ratios,
    running_l2_norms,
    spatial_norms,
)
from ..history.operators import HistoryStates
from .elliptic import FrozenData, FrozenSolution, SolveConfig, solve_frozen

logger = logging.getLogger(__name__)

TRAPEZOID_MAX_SWEEPS = 50


class EvolutionMode(str, Enum):
    TIME_MARCH = "time-march"
    GLOBAL_PICARD = "global-picard"
    BOTH = "both"


@dataclass
class EvolutionConfig:
    grid: TimeGrid
    frozen_cfg: SolveConfig = field(default_factory=SolveConfig)
    picard_tol: float = 1e-8
    max_picard: int = 100
    mode: EvolutionMode = EvolutionMode.TIME_MARCH
    workers: int = 4

    def __post_init__(self):
        self.mode = EvolutionMode(self.mode)
        if not self.picard_tol > 0:
            raise ValueError("picard_tol must be positive")
        if self.max_picard < 1:
            raise ValueError("max_picard must be positive")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")

    def to_dict(self) -> Dict:
        return {
            "grid": self.grid.to_dict(),
            "frozen_cfg": self.frozen_cfg.to_dict(),
            "picard_tol": self.picard_tol,
            "max_picard": self.max_picard,
            "mode": self.mode.value,
            "workers": self.workers,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "EvolutionConfig":
        data = dict(data)
        known = {"grid", "frozen_cfg", "picard_tol", "max_picard", "mode", "workers"}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown evolution settings: {sorted(unknown)}")
        grid = data.pop("grid", None)
        if grid is None:
            raise ValueError("evolution settings need a grid")
        if isinstance(grid, dict):
            grid = TimeGrid(**grid)
        frozen = SolveConfig.from_dict(data.pop("frozen_cfg", None))
        return cls(grid=grid, frozen_cfg=frozen, **data)


@dataclass
class NodeStats:
    node: int
    t: float
    iterations: int
    inner_iterations: int
    residual: float
    step: float

    @classmethod
    def from_solution(cls, n: int, t: float, sol: FrozenSolution) -> "NodeStats":
        return cls(n, t, sol.iterations, sol.inner_iterations, sol.residual, sol.step)


@dataclass
class EvolutionReport:
    mode: EvolutionMode
    trajectory: Trajectory
    node_stats: List[NodeStats]
    picard_residuals: List[float] = field(default_factory=list)
    state_residuals: List[float] = field(default_factory=list)
    iterations: int = 0

    @property
    def contraction_ratios(self) -> List[float]:
        r = self.picard_residuals
        return [r[k] / r[k - 1] for k in range(1, len(r)) if r[k - 1] > 0]

    def to_dict(self) -> Dict:
        return {
            "mode": self.mode.value,
            "grid": self.trajectory.grid.to_dict(),
            "iterations": self.iterations,
            "picard_residuals": [float(r) for r in self.picard_residuals],
            "state_residuals": [float(r) for r in self.state_residuals],
            "contraction_ratios": [float(r) for r in self.contraction_ratios],
            "max_frozen_residual": max((s.residual for s in self.node_stats), default=0.0),
            "total_inner_iterations": sum(s.inner_iterations for s in self.node_stats),
        }


def _require_margin(p: AbstractProblem):
    margin = smallness_margin(p.constants)
    if margin <= 0:
        raise SmallnessViolation(margin)
    return margin


def _solve_node(p, cfg: EvolutionConfig, n: int, states, initial) -> FrozenSolution:
    lam, xi, eta, zeta = states
    d = FrozenData(cfg.grid.time(n), lam, xi, eta, zeta)
    try:
        return solve_frozen(p, d, cfg.frozen_cfg, initial=initial)
    except ConvergenceError as exc:
        raise ConvergenceError(exc.args[0], exc.stage, exc.residual_history, node=n) from exc
    except StepSizeError as exc:
        raise StepSizeError(exc.step, exc.residual_history, node=n) from exc


def _check_grid(p: AbstractProblem, grid: TimeGrid):
    if not np.isclose(grid.T, p.horizon):
        logger.warning(f"{p.name}: grid horizon {grid.T} differs from problem horizon {p.horizon}")


# ---------------------------------------------------------------------------
# Time marching
# ---------------------------------------------------------------------------


def time_march(p: AbstractProblem, cfg: EvolutionConfig) -> EvolutionReport:
    """Solve node by node with history states built from earlier samples."""
    _require_margin(p)
    _check_grid(p, cfg.grid)
    grid = cfg.grid
    rule = p.histories.rule
    samples = np.zeros((grid.N + 1, p.dim))
    stats: List[NodeStats] = []
    previous = None
    for n in range(grid.N + 1):
        if rule == QuadratureRule.LEFT_RECTANGLE:
            states = p.histories.states_at(samples, grid, n)
            sol = _solve_node(p, cfg, n, states, previous)
        else:
            sol = _implicit_node(p, cfg, samples, n, previous)
        samples[n] = sol.w.values
        previous = samples[n]
        stats.append(NodeStats.from_solution(n, grid.time(n), sol))
        logger.info(
            f"{p.name}: node {n}/{grid.N} t={grid.time(n):.4f} "
            f"outer={sol.iterations} inner={sol.inner_iterations} residual={sol.residual:.2e}"
        )
    return EvolutionReport(EvolutionMode.TIME_MARCH, Trajectory(grid, samples), stats)


def _implicit_node(p, cfg: EvolutionConfig, samples: np.ndarray, n: int, previous) -> FrozenSolution:
    """Trapezoid histories see w_n itself; resolve by fixed point on the node sample."""
    tol = cfg.frozen_cfg.inner_tol
    samples[n] = 0.0 if previous is None else previous
    history = []
    for _ in range(TRAPEZOID_MAX_SWEEPS):
        states = p.histories.states_at(samples, cfg.grid, n)
        sol = _solve_node(p, cfg, n, states, samples[n])
        diff = p.metric.norm(sol.w.values - samples[n])
        history.append(diff)
        samples[n] = sol.w.values
        if diff <= tol:
            return sol
    raise ConvergenceError(
        f"implicit history coupling did not settle in {TRAPEZOID_MAX_SWEEPS} sweeps",
        stage="trapezoid",
        residual_history=history,
        node=n,
    )


# ---------------------------------------------------------------------------
# Global Picard iteration on the history states
# ---------------------------------------------------------------------------


def _solve_all_nodes(
    p, cfg: EvolutionConfig, states: HistoryStates, warm: np.ndarray
) -> Tuple[np.ndarray, List[NodeStats]]:
    grid = cfg.grid

    def task(n):
        return _solve_node(p, cfg, n, states.at(n), warm[n])

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            solutions = list(pool.map(task, range(grid.N + 1)))
    else:
        solutions = [task(n) for n in range(grid.N + 1)]
    samples = np.vstack([s.w.values for s in solutions])
    stats = [NodeStats.from_solution(n, grid.time(n), s) for n, s in enumerate(solutions)]
    return samples, stats


def picard_global(
    p: AbstractProblem, cfg: EvolutionConfig, init: Optional[Trajectory] = None
) -> EvolutionReport:
    """Iterate states -> trajectory -> states until the trajectory settles."""
    _require_margin(p)
    _check_grid(p, cfg.grid)
    grid, rule = cfg.grid, p.histories.rule
    if init is None:
        current = np.zeros((grid.N + 1, p.dim))
    else:
        if init.grid != grid or init.dim != p.dim:
            raise DimensionError("initial trajectory does not match the grid or the DoF space")
        current = np.array(init.samples)
    states = p.histories.states(current, grid)
    residuals: List[float] = []
    state_residuals: List[float] = []
    for k in range(1, cfg.max_picard + 1):
        samples, stats = _solve_all_nodes(p, cfg, states, current)
        diff = l2_norm(samples - current, grid, rule, metric=p.metric)
        new_states = p.histories.states(samples, grid)
        state_diff = p.histories.states_distance(new_states, states, grid)
        residuals.append(diff)
        state_residuals.append(state_diff)
        logger.info(f"{p.name}: Picard sweep {k} |dw|={diff:.3e} |dstate|={state_diff:.3e}")
        current, states = samples, new_states
        if diff <= cfg.picard_tol or state_diff == 0.0:
            return EvolutionReport(
                EvolutionMode.GLOBAL_PICARD,
                Trajectory(grid, current),
                stats,
                residuals,
                state_residuals,
                k,
            )
    raise ConvergenceError(
        f"Picard iteration did not reach {cfg.picard_tol:.1e} in {cfg.max_picard} sweeps",
        stage="picard",
        residual_history=residuals,
    )


# ---------------------------------------------------------------------------
# Stability and uniqueness harnesses
# ---------------------------------------------------------------------------


@dataclass
class StabilityReport:
    pointwise_lhs: np.ndarray
    pointwise_rhs: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    passed: bool
    skipped: bool = False
    note: str = ""

    @property
    def ratio(self) -> float:
        mask = self.rhs > 0
        if not np.any(mask):
            return 0.0
        return float(np.max(self.lhs[mask] / self.rhs[mask]))

    def to_dict(self) -> Dict:
        return {
            "passed": self.passed,
            "skipped": self.skipped,
            "note": self.note,
            "ratio": self.ratio,
            "lhs": [float(v) for v in self.lhs],
            "rhs": [float(v) for v in self.rhs],
        }


def stability_ratio(
    p: AbstractProblem,
    cfg: EvolutionConfig,
    perturb: HistoryStates,
    base: Optional[HistoryStates] = None,
) -> StabilityReport:
    """Compare frozen solves under base and perturbed history states.

    Pointwise: |w1(t) - w2(t)| <= (m_A_bar|dlam| + L_f|dxi| + beta_phi|deta|
    + m_1|M||dzeta|) / margin. The integrated form takes L2(0, t_n) of both
    sides with the history quadrature rule.
    """
    margin = _require_margin(p)
    grid, rule = cfg.grid, p.histories.rule
    base = base or p.histories.zero_states(grid)
    h = p.constants
    r1, r2, r3, r4 = p.histories.operators
    component_norms = [
        spatial_norms(perturb.lam, weights=r1.output_weights),
        spatial_norms(perturb.xi, weights=r2.output_weights),
        spatial_norms(perturb.eta, weights=r3.output_weights),
        spatial_norms(perturb.zeta, weights=r4.output_weights),
    ]
    factors = [h.m_A_bar, h.L_f, h.beta_phi, h.m_1 * h.M_norm]
    pointwise_rhs = sum(c * v for c, v in zip(factors, component_norms)) / margin
    zeros = np.zeros(grid.N + 1)
    if all(np.all(v == 0.0) for v in component_norms):
        logger.info(f"{p.name}: zero perturbation, stability check skipped")
        return StabilityReport(zeros, zeros, zeros, zeros, True, True, "zero perturbation")

    warm = np.zeros((grid.N + 1, p.dim))
    w1, _ = _solve_all_nodes(p, cfg, base, warm)
    w2, _ = _solve_all_nodes(p, cfg, base.shifted(perturb), w1)
    pointwise_lhs = spatial_norms(w1 - w2, p.metric)
    lhs = running_l2_norms(w1 - w2, grid, rule, metric=p.metric)
    rhs = running_l2_norms(pointwise_rhs[:, None], grid, rule)
    tol = cfg.frozen_cfg.inner_tol
    slack_pt = 10.0 * tol + 1e-8 * pointwise_rhs
    slack = 10.0 * tol * np.sqrt(grid.nodes) + 1e-8 * rhs
    passed = bool(np.all(pointwise_lhs <= pointwise_rhs + slack_pt) and np.all(lhs <= rhs + slack))
    if not passed:
        worst = int(np.argmax(pointwise_lhs - pointwise_rhs))
        logger.warning(f"{p.name}: stability bound violated near node {worst}")
    return StabilityReport(pointwise_lhs, pointwise_rhs, lhs, rhs, passed)


@dataclass
class UniquenessReport:
    max_distance: float
    worst_pair: Optional[Tuple[int, int]]
    runs: int

    def to_dict(self) -> Dict:
        return {
            "max_distance": self.max_distance,
            "worst_pair": list(self.worst_pair) if self.worst_pair else None,
            "runs": self.runs,
        }


def uniqueness_probe(
    p: AbstractProblem, cfg: EvolutionConfig, inits: Sequence[Trajectory]
) -> UniquenessReport:
    """Run Picard from each init; report the largest pairwise L2(0, T; V) distance."""
    if len(inits) < 2:
        raise ValueError("uniqueness_probe needs at least two initial trajectories")
    finals = [picard_global(p, cfg, init).trajectory.samples for init in inits]
    worst, pair = 0.0, None
    for i in range(len(finals)):
        for k in range(i + 1, len(finals)):
            dist = l2_norm(finals[i] - finals[k], cfg.grid, p.histories.rule, metric=p.metric)
            if pair is None or dist > worst:
                worst, pair = dist, (i, k)
    return UniquenessReport(float(worst), pair, len(finals))


# ---------------------------------------------------------------------------
# Grid refinement
# ---------------------------------------------------------------------------


@dataclass
class RefinementStudy:
    steps: List[int]
    differences: List[float]
    ratios: List[float]
    errors: List[float] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return {
            "steps": self.steps,
            "differences": self.differences,
            "ratios": self.ratios,
            "errors_vs_finest": self.errors,
        }


def refinement_study(p: AbstractProblem, cfg: EvolutionConfig, levels: int) -> RefinementStudy:
    """March on `levels + 1` successively halved grids; compare neighbours and the finest run on the coarse nodes."""
    if levels < 1:
        raise ValueError("levels must be at least 1")
    grids = [cfg.grid]
    for _ in range(levels):
        grids.append(grids[-1].halved())
    runs = []
    for grid in grids:
        level_cfg = EvolutionConfig(grid, cfg.frozen_cfg, cfg.picard_tol, cfg.max_picard, cfg.mode, cfg.workers)
        runs.append(time_march(p, level_cfg).trajectory.samples)
    rule = p.histories.rule
    differences, errors = [], []
    for k in range(levels):
        coarse = runs[k]
        differences.append(l2_norm(coarse - runs[k + 1][::2], grids[k], rule, metric=p.metric))
        errors.append(l2_norm(coarse - runs[-1][:: 2 ** (levels - k)], grids[k], rule, metric=p.metric))
    return RefinementStudy([g.N for g in grids], differences, refinement_ratios(differences), errors)
