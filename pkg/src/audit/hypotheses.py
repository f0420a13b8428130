"""
Sampled audits of the hypotheses the solvers rely on.

Sampling can only find violations, so a passing entry reads
"no violation found in N samples". Every entry records the seed and, when it
fails, the exact inputs of the worst sample so the violation can be replayed.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from ..core.potentials import PrototypePotential
from ..core.problem import AbstractProblem, check_relaxed_monotonicity, smallness_margin
from ..core.spaces import apply_trace, apply_trace_adjoint, power_iteration
from ..history.grid import TimeGrid, Trajectory
from ..history.operators import ZeroHistory, audit_history_lipschitz

logger = logging.getLogger(__name__)

BY_CONSTRUCTION = "holds by construction for shipped prototypes (continuity + finite dimension)"


@dataclass
class AuditConfig:
    samples: int = 500
    seed: int = 0
    safety_factor: float = 1.05
    radii: Tuple[float, ...] = (0.1, 1.0, 10.0)
    workers: int = 4
    history_pairs: int = 20
    history_steps: int = 10

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("samples must be at least 1")
        if self.safety_factor < 1.0:
            raise ValueError("safety_factor must be at least 1")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        self.radii = tuple(float(r) for r in self.radii)
        if not self.radii or min(self.radii) <= 0:
            raise ValueError("radii must be positive")

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["radii"] = list(self.radii)
        return data

    @classmethod
    def from_dict(cls, data: Optional[Dict]) -> "AuditConfig":
        data = dict(data or {})
        unknown = set(data) - {f.name for f in fields(cls)}
        if unknown:
            raise ValueError(f"unknown audit settings: {sorted(unknown)}")
        return cls(**data)


@dataclass
class AuditEntry:
    name: str
    claimed: Optional[float]
    estimate: Optional[float]
    passed: bool
    samples: int = 0
    seed: Optional[int] = None
    witness: Optional[Dict] = None
    note: str = ""

    @property
    def statement(self) -> str:
        if self.note:
            return self.note
        if self.passed:
            return f"no violation found in {self.samples} samples"
        return f"violation found (seed {self.seed})"

    def to_dict(self) -> Dict:
        return {
            "name": self.name,
            "claimed": None if self.claimed is None else float(self.claimed),
            "estimate": None if self.estimate is None else float(self.estimate),
            "passed": bool(self.passed),
            "samples": self.samples,
            "seed": self.seed,
            "statement": self.statement,
            "witness": self.witness,
        }


@dataclass
class AuditReport:
    problem: str
    seed: int
    entries: List[AuditEntry] = field(default_factory=list)
    h0_margin: Optional[float] = None
    contact_margin: Optional[float] = None

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def failures(self) -> List[AuditEntry]:
        return [e for e in self.entries if not e.passed]

    def entry(self, name: str) -> AuditEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def to_dict(self) -> Dict:
        return {
            "problem": self.problem,
            "seed": self.seed,
            "passed": self.passed,
            "h0_margin": self.h0_margin,
            "contact_margin": self.contact_margin,
            "entries": [e.to_dict() for e in self.entries],
        }

    def rows(self) -> List[Dict]:
        """Flat rows for tabular export (no witnesses)."""
        return [
            {k: v for k, v in e.to_dict().items() if k != "witness"}
            for e in self.entries
        ]


# ---------------------------------------------------------------------------
# Sampling helpers
# ---------------------------------------------------------------------------


def _evaluate(fn: Callable, tasks: Sequence, workers: int) -> List:
    if workers > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, tasks))
    return [fn(task) for task in tasks]


def _gaussian(rng: np.random.Generator, dim: int, radius: float) -> np.ndarray:
    if dim == 0:
        return np.zeros(0)
    d = rng.standard_normal(dim)
    return radius * d / max(np.linalg.norm(d), np.finfo(float).tiny)


def _radius(cfg: AuditConfig, scale: float, k: int) -> float:
    return cfg.radii[k % len(cfg.radii)] * scale


def _weakest_direction(p: AbstractProblem) -> Optional[np.ndarray]:
    """Unit V-direction minimizing <S d, d> / |d|^2 for affine A."""
    s = p.operator.stiffness
    if s is None:
        return None
    sym = (s + s.T) / 2.0
    _, vecs = linalg.eigh(sym, p.metric.gram)
    d = vecs[:, 0]
    return d / p.metric.norm(d)


def _lift(p: AbstractProblem, x: np.ndarray) -> np.ndarray:
    """Minimum-norm DoF vector with trace x."""
    return np.linalg.lstsq(p.trace.matrix, x, rcond=None)[0]


def _worst(values: Sequence[float]) -> int:
    return int(np.argmin(values))


def _as_list(v) -> List[float]:
    return [float(x) for x in np.atleast_1d(v)]


# ---------------------------------------------------------------------------
# Strong monotonicity of A with the history coupling
# ---------------------------------------------------------------------------


def operator_a_gap(p: AbstractProblem, t, lam1, lam2, v1, v2, m_A: float, m_A_bar: float) -> float:
    """<A(t,lam1,v1) - A(t,lam2,v2), dv> - m_A|dv|^2 + m_A_bar|dlam|_E|dv|, nonnegative when A is strongly monotone."""
    v1, v2 = np.asarray(v1, dtype=float), np.asarray(v2, dtype=float)
    lam1, lam2 = np.asarray(lam1, dtype=float), np.asarray(lam2, dtype=float)
    dv = v1 - v2
    pairing = float((p.operator.eval(t, lam1, v1) - p.operator.eval(t, lam2, v2)) @ dv)
    norm_dv = p.metric.norm(dv)
    norm_dl = p.histories.R1.output_norm(lam1 - lam2)
    return pairing - m_A * norm_dv**2 + m_A_bar * norm_dl * norm_dv


def audit_operator_A(
    p: AbstractProblem,
    cfg: Optional[AuditConfig] = None,
    m_A: Optional[float] = None,
    m_A_bar: Optional[float] = None,
) -> AuditEntry:
    cfg = cfg or AuditConfig()
    h = p.constants
    m_A = h.m_A if m_A is None else float(m_A)
    m_A_bar = h.m_A_bar if m_A_bar is None else float(m_A_bar)
    rng = np.random.default_rng(cfg.seed)
    n_lam = p.histories.dims[0]
    tasks = []
    weakest = _weakest_direction(p)
    if weakest is not None:
        lam = _gaussian(rng, n_lam, p.scale)
        tasks.append((0.0, lam, lam, weakest * p.scale, np.zeros(p.dim)))
    while len(tasks) < cfg.samples:
        k = len(tasks)
        r = _radius(cfg, p.scale, k)
        t = float(rng.uniform(0.0, p.horizon))
        tasks.append((t, _gaussian(rng, n_lam, r), _gaussian(rng, n_lam, r), _gaussian(rng, p.dim, r), _gaussian(rng, p.dim, r)))

    def gap(task):
        t, l1, l2, v1, v2 = task
        slack = 1e-10 * p.scale * max(1.0, p.metric.norm(v1 - v2) ** 2)
        return operator_a_gap(p, t, l1, l2, v1, v2, m_A, m_A_bar) + slack

    values = _evaluate(gap, tasks, cfg.workers)
    k = _worst(values)
    passed = values[k] >= 0.0
    witness = None
    if not passed:
        t, l1, l2, v1, v2 = tasks[k]
        witness = {"sample": k, "t": t, "lam1": _as_list(l1), "lam2": _as_list(l2), "v1": _as_list(v1), "v2": _as_list(v2)}
    return AuditEntry("A strong monotonicity", m_A, float(values[k]), passed, len(tasks), cfg.seed, witness)


# ---------------------------------------------------------------------------
# Monotonicity of v -> A(v) + M* dj(Mv)
# ---------------------------------------------------------------------------


def multivalued_pairing(p: AbstractProblem, t, lam, zeta, v1, v2) -> float:
    """<A(v1) + M* z1 - A(v2) - M* z2, v1 - v2> with z_i the subgradient selections."""
    v1, v2 = np.asarray(v1, dtype=float), np.asarray(v2, dtype=float)
    z1 = p.j.subgrad_select(t, zeta, apply_trace(p.trace, v1))
    z2 = p.j.subgrad_select(t, zeta, apply_trace(p.trace, v2))
    a1 = p.operator.eval(t, lam, v1) + apply_trace_adjoint(p.trace, z1)
    a2 = p.operator.eval(t, lam, v2) + apply_trace_adjoint(p.trace, z2)
    return float((a1 - a2) @ (v1 - v2))


def _kink_pairs(p: AbstractProblem, rng, count: int) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Pairs whose traces sit on the kinks and on the descending piece of the prototype slope."""
    pot = p.j
    if not isinstance(pot, PrototypePotential) or p.trace.boundary_dim == 0 or count <= 0:
        return []
    knots = np.asarray(getattr(pot.g, "knots", np.zeros(1)), dtype=float)
    direction = power_iteration(p.trace, p.metric).direction
    traced = np.max(np.abs(apply_trace(p.trace, direction)))
    pairs = []
    for k in range(count):
        if knots.size > 1 and k % 2 == 0:
            lo, hi = knots[k // 2 % (knots.size - 1)], knots[k // 2 % (knots.size - 1) + 1]
            centre = np.full(p.trace.boundary_dim, (lo + hi) / 2.0)
            delta = 0.4 * (hi - lo) / traced if traced > 0 else 0.0
        else:
            centre = knots[k % knots.size] + 0.05 * rng.standard_normal(p.trace.boundary_dim)
            delta = 0.1 / traced if traced > 0 else 0.0
        base = _lift(p, centre)
        pairs.append((base, base + delta * direction))
    return pairs


def audit_multivalued_monotone(p: AbstractProblem, cfg: Optional[AuditConfig] = None) -> AuditEntry:
    cfg = cfg or AuditConfig()
    rng = np.random.default_rng(cfg.seed + 1)
    n_lam, _, _, n_zeta = p.histories.dims
    pairs = _kink_pairs(p, rng, min(cfg.samples // 5, 100))
    tasks = []
    for v1, v2 in pairs:
        tasks.append((float(rng.uniform(0.0, p.horizon)), _gaussian(rng, n_lam, p.scale), _gaussian(rng, n_zeta, p.scale), v1, v2))
    while len(tasks) < cfg.samples:
        r = _radius(cfg, p.scale, len(tasks))
        t = float(rng.uniform(0.0, p.horizon))
        tasks.append((t, _gaussian(rng, n_lam, r), _gaussian(rng, n_zeta, r), _gaussian(rng, p.dim, r), _gaussian(rng, p.dim, r)))

    def pairing(task):
        t, lam, zeta, v1, v2 = task
        slack = 1e-10 * p.scale * max(1.0, p.metric.norm(v1 - v2) ** 2)
        return multivalued_pairing(p, t, lam, zeta, v1, v2) + slack

    values = _evaluate(pairing, tasks, cfg.workers)
    k = _worst(values)
    passed = values[k] >= 0.0
    witness = None
    if not passed:
        t, lam, zeta, v1, v2 = tasks[k]
        witness = {"sample": k, "t": t, "lam": _as_list(lam), "zeta": _as_list(zeta), "v1": _as_list(v1), "v2": _as_list(v2)}
        logger.warning(f"{p.name}: A + M* dj M not monotone at sample {k} ({values[k]:.3e})")
    return AuditEntry("A + M* dj(M.) monotone", 0.0, float(values[k]), passed, len(tasks), cfg.seed + 1, witness)


# ---------------------------------------------------------------------------
# phi: four-point inequality and convexity
# ---------------------------------------------------------------------------


def phi_four_point_gap(p: AbstractProblem, t, eta1, eta2, w1, w2, v1, v2, alpha: float, beta: float) -> float:
    """Right side minus left side of the phi four-point inequality; nonnegative when it holds."""
    phi = p.phi
    lhs = (
        phi.value(t, eta1, w1, v1)
        - phi.value(t, eta1, w1, v2)
        + phi.value(t, eta2, w2, v2)
        - phi.value(t, eta2, w2, v1)
    )
    norm_dv = p.metric.norm(np.asarray(v1) - np.asarray(v2))
    rhs = (
        alpha * p.metric.norm(np.asarray(w1) - np.asarray(w2)) * norm_dv
        + beta * p.histories.R3.output_norm(np.asarray(eta1) - np.asarray(eta2)) * norm_dv
    )
    return float(rhs - lhs)


def phi_midpoint_gap(p: AbstractProblem, t, eta, w, v1, v2) -> float:
    phi = p.phi
    mid = (np.asarray(v1) + np.asarray(v2)) / 2.0
    return float((phi.value(t, eta, w, v1) + phi.value(t, eta, w, v2)) / 2.0 - phi.value(t, eta, w, mid))


def audit_potential_phi(
    p: AbstractProblem,
    cfg: Optional[AuditConfig] = None,
    alpha_phi: Optional[float] = None,
    beta_phi: Optional[float] = None,
) -> List[AuditEntry]:
    """Four-point inequality against (alpha_phi, beta_phi) and midpoint convexity in v."""
    cfg = cfg or AuditConfig()
    h = p.constants
    alpha = h.alpha_phi if alpha_phi is None else float(alpha_phi)
    beta = h.beta_phi if beta_phi is None else float(beta_phi)
    seed = cfg.seed + 2
    rng = np.random.default_rng(seed)
    n_eta = p.histories.dims[2]
    tasks = []
    while len(tasks) < cfg.samples:
        k = len(tasks)
        r = _radius(cfg, p.scale, k)
        t = float(rng.uniform(0.0, p.horizon))
        eta1 = _gaussian(rng, n_eta, r)
        w1 = _gaussian(rng, p.dim, r)
        # every third sample isolates one coupling
        eta2 = eta1.copy() if k % 3 == 1 else _gaussian(rng, n_eta, r)
        w2 = w1.copy() if k % 3 == 2 else _gaussian(rng, p.dim, r)
        tasks.append((t, eta1, eta2, w1, w2, _gaussian(rng, p.dim, r), _gaussian(rng, p.dim, r)))

    def four_point(task):
        t, e1, e2, w1, w2, v1, v2 = task
        slack = 1e-10 * p.scale * max(1.0, p.metric.norm(v1 - v2) * (1.0 + p.metric.norm(w1 - w2)))
        return phi_four_point_gap(p, t, e1, e2, w1, w2, v1, v2, alpha, beta) + slack

    def midpoint(task):
        t, e1, _, w1, _, v1, v2 = task
        return phi_midpoint_gap(p, t, e1, w1, v1, v2) + 1e-10 * p.scale * max(1.0, p.metric.norm(v1 - v2))

    gaps = _evaluate(four_point, tasks, cfg.workers)
    k = _worst(gaps)
    witness = None
    if gaps[k] < 0.0:
        t, e1, e2, w1, w2, v1, v2 = tasks[k]
        witness = {
            "sample": k,
            "t": t,
            "eta1": _as_list(e1),
            "eta2": _as_list(e2),
            "w1": _as_list(w1),
            "w2": _as_list(w2),
            "v1": _as_list(v1),
            "v2": _as_list(v2),
        }
    four = AuditEntry("phi four-point inequality", alpha, float(gaps[k]), gaps[k] >= 0.0, len(tasks), seed, witness)

    mids = _evaluate(midpoint, tasks, cfg.workers)
    m = _worst(mids)
    convex = AuditEntry("phi convexity in v", 0.0, float(mids[m]), mids[m] >= 0.0, len(tasks), seed)
    if not convex.passed:
        convex.witness = {"sample": m}
    return [four, convex]


# ---------------------------------------------------------------------------
# Growth and Lipschitz bounds of A, f, j and M
# ---------------------------------------------------------------------------


def _upper_slack(bound: float) -> float:
    return 1e-10 * max(1.0, abs(bound))


def _isolating(rng, k: int, n: int, r: float) -> np.ndarray:
    """Every third sample zeroes one argument so each constant is checked alone."""
    return np.zeros(n) if k % 3 == 1 else _gaussian(rng, n, r)


def operator_growth_gap(p: AbstractProblem, t, lam, v, a0: float, a1: float, a2: float) -> float:
    """a0 + a1|lam| + a2|v| - |A(t, lam, v)|_V*, nonnegative when the growth bound holds."""
    bound = a0 + a1 * p.histories.R1.output_norm(lam) + a2 * p.metric.norm(v)
    return float(bound - p.metric.dual_norm(p.operator.eval(t, lam, v)) + _upper_slack(bound))


def audit_operator_growth(
    p: AbstractProblem,
    cfg: Optional[AuditConfig] = None,
    a0_max: Optional[float] = None,
    a1: Optional[float] = None,
    a2: Optional[float] = None,
) -> AuditEntry:
    cfg = cfg or AuditConfig()
    h = p.constants
    a0 = h.a0_max if a0_max is None else float(a0_max)
    a1 = h.a1 if a1 is None else float(a1)
    a2 = h.a2 if a2 is None else float(a2)
    seed = cfg.seed + 4
    rng = np.random.default_rng(seed)
    n_lam = p.histories.dims[0]
    tasks = [(0.0, np.zeros(n_lam), np.zeros(p.dim))]
    while len(tasks) < cfg.samples:
        k = len(tasks)
        r = _radius(cfg, p.scale, k)
        t = float(rng.uniform(0.0, p.horizon))
        v = _isolating(rng, k, p.dim, r)
        lam = np.zeros(n_lam) if k % 3 == 2 else _gaussian(rng, n_lam, r)
        tasks.append((t, lam, v))

    values = _evaluate(lambda task: operator_growth_gap(p, *task, a0, a1, a2), tasks, cfg.workers)
    k = _worst(values)
    passed = values[k] >= 0.0
    witness = None
    if not passed:
        t, lam, v = tasks[k]
        witness = {"sample": k, "t": t, "lam": _as_list(lam), "v": _as_list(v)}
        logger.warning(f"{p.name}: growth bound of A exceeded at sample {k} ({values[k]:.3e})")
    return AuditEntry("A growth bound", a2, float(values[k]), passed, len(tasks), seed, witness)


def load_lipschitz_gap(p: AbstractProblem, t, xi1, xi2, L_f: float) -> float:
    bound = L_f * p.histories.R2.output_norm(np.asarray(xi1) - np.asarray(xi2))
    return float(bound - p.metric.dual_norm(p.load(t, xi1) - p.load(t, xi2)) + _upper_slack(bound))


def audit_load_lipschitz(p: AbstractProblem, cfg: Optional[AuditConfig] = None, L_f: Optional[float] = None) -> AuditEntry:
    cfg = cfg or AuditConfig()
    L_f = p.constants.L_f if L_f is None else float(L_f)
    n_xi = p.histories.dims[1]
    if n_xi == 0:
        return AuditEntry("f lipschitz", L_f, 0.0, True, note="load carries no history state")
    seed = cfg.seed + 5
    rng = np.random.default_rng(seed)
    tasks = []
    while len(tasks) < cfg.samples:
        r = _radius(cfg, p.scale, len(tasks))
        tasks.append((float(rng.uniform(0.0, p.horizon)), _gaussian(rng, n_xi, r), _gaussian(rng, n_xi, r)))

    values = _evaluate(lambda task: load_lipschitz_gap(p, *task, L_f), tasks, cfg.workers)
    k = _worst(values)
    passed = values[k] >= 0.0
    witness = None
    if not passed:
        t, xi1, xi2 = tasks[k]
        witness = {"sample": k, "t": t, "xi1": _as_list(xi1), "xi2": _as_list(xi2)}
    return AuditEntry("f lipschitz", L_f, float(values[k]), passed, len(tasks), seed, witness)


def _boundary_samples(p: AbstractProblem, cfg: AuditConfig) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Boundary points on the prototype knots, paired with flat zeta at 0 and +-max radius."""
    knots = np.asarray(getattr(getattr(p.j, "g", None), "knots", np.zeros(0)), dtype=float)
    n_x, n_zeta = p.trace.boundary_dim, p.histories.dims[3]
    r = max(cfg.radii) * p.scale
    return [
        (np.full(n_x, knot), np.full(n_zeta, z))
        for knot in knots
        for z in (0.0, r, -r)
    ]


def j_growth_gap(p: AbstractProblem, t, zeta, x, c0: float, c1: float, c2: float) -> float:
    """c0 + c1|zeta| + c2|x|_X - |xi|_X for the selected subgradient xi."""
    bound = c0 + c1 * p.histories.R4.output_norm(zeta) + c2 * p.trace.x_norm(x)
    xi = p.j.subgrad_select(t, zeta, x)
    return float(bound - p.trace.x_norm(xi) + _upper_slack(bound))


def audit_j_growth(
    p: AbstractProblem,
    cfg: Optional[AuditConfig] = None,
    c0j_max: Optional[float] = None,
    c1j: Optional[float] = None,
    c2j: Optional[float] = None,
) -> AuditEntry:
    cfg = cfg or AuditConfig()
    h = p.constants
    c0 = h.c0j_max if c0j_max is None else float(c0j_max)
    c1 = h.c1j if c1j is None else float(c1j)
    c2 = h.c2j if c2j is None else float(c2j)
    n_x, n_zeta = p.trace.boundary_dim, p.histories.dims[3]
    if n_x == 0:
        return AuditEntry("j subgradient growth", c0, 0.0, True, note="no boundary space")
    seed = cfg.seed + 6
    rng = np.random.default_rng(seed)
    tasks = [(0.0, zeta, x) for x, zeta in _boundary_samples(p, cfg)]
    while len(tasks) < cfg.samples:
        k = len(tasks)
        r = _radius(cfg, p.scale, k)
        zeta = _isolating(rng, k, n_zeta, r)
        tasks.append((float(rng.uniform(0.0, p.horizon)), zeta, _gaussian(rng, n_x, r)))

    values = _evaluate(lambda task: j_growth_gap(p, *task, c0, c1, c2), tasks, cfg.workers)
    k = _worst(values)
    passed = values[k] >= 0.0
    witness = None
    if not passed:
        t, zeta, x = tasks[k]
        witness = {"sample": k, "t": t, "zeta": _as_list(zeta), "x": _as_list(x)}
        logger.warning(f"{p.name}: subgradient growth of j exceeded at sample {k} ({values[k]:.3e})")
    return AuditEntry("j subgradient growth", c0, float(values[k]), passed, len(tasks), seed, witness)


def j_coupling_gap(p: AbstractProblem, t, zeta1, zeta2, x1, x2, m_j: float, m_1: float) -> float:
    """m_j|dx|^2 + m_1|dzeta||dx| - j°(zeta1, x1; x2 - x1) - j°(zeta2, x2; x1 - x2)."""
    x1, x2 = np.asarray(x1, dtype=float), np.asarray(x2, dtype=float)
    dx = p.trace.x_norm(x1 - x2)
    dz = p.histories.R4.output_norm(np.asarray(zeta1) - np.asarray(zeta2))
    bound = m_j * dx**2 + m_1 * dz * dx
    lhs = p.j.dir_deriv(t, zeta1, x1, x2 - x1) + p.j.dir_deriv(t, zeta2, x2, x1 - x2)
    return float(bound - lhs + _upper_slack(bound))


def audit_j_coupling(
    p: AbstractProblem,
    cfg: Optional[AuditConfig] = None,
    m_j: Optional[float] = None,
    m_1: Optional[float] = None,
) -> AuditEntry:
    """Relaxed monotonicity of j in x with its zeta coupling, on random and knot-straddling pairs."""
    cfg = cfg or AuditConfig()
    h = p.constants
    m_j = h.m_j if m_j is None else float(m_j)
    m_1 = h.m_1 if m_1 is None else float(m_1)
    n_x, n_zeta = p.trace.boundary_dim, p.histories.dims[3]
    if n_x == 0:
        return AuditEntry("j relaxed monotonicity", m_j, 0.0, True, note="no boundary space")
    seed = cfg.seed + 7
    rng = np.random.default_rng(seed)
    r_max = max(cfg.radii) * p.scale
    tasks = []
    knots = np.asarray(getattr(getattr(p.j, "g", None), "knots", np.zeros(0)), dtype=float)
    for lo, hi in zip(knots[:-1], knots[1:]):
        mid, half = (lo + hi) / 2.0, 0.4 * (hi - lo)
        zeta = np.full(n_zeta, r_max)
        tasks.append((0.0, zeta, zeta, np.full(n_x, mid - half), np.full(n_x, mid + half)))
    while len(tasks) < cfg.samples:
        k = len(tasks)
        r = _radius(cfg, p.scale, k)
        t = float(rng.uniform(0.0, p.horizon))
        zeta1 = _gaussian(rng, n_zeta, r)
        zeta2 = zeta1.copy() if k % 3 == 1 else _gaussian(rng, n_zeta, r)
        x1 = _gaussian(rng, n_x, r)
        # close pairs expose the first-order zeta coupling
        x2 = x1 + _gaussian(rng, n_x, 1e-3 * r) if k % 3 == 2 else _gaussian(rng, n_x, r)
        tasks.append((t, zeta1, zeta2, x1, x2))

    values = _evaluate(lambda task: j_coupling_gap(p, *task, m_j, m_1), tasks, cfg.workers)
    k = _worst(values)
    passed = values[k] >= 0.0
    witness = None
    if not passed:
        t, zeta1, zeta2, x1, x2 = tasks[k]
        witness = {
            "sample": k,
            "t": t,
            "zeta1": _as_list(zeta1),
            "zeta2": _as_list(zeta2),
            "x1": _as_list(x1),
            "x2": _as_list(x2),
        }
        logger.warning(f"{p.name}: relaxed monotonicity of j violated at sample {k} ({values[k]:.3e})")
    return AuditEntry("j relaxed monotonicity", m_j, float(values[k]), passed, len(tasks), seed, witness)


def audit_trace_norm(p: AbstractProblem, cfg: Optional[AuditConfig] = None, M_norm: Optional[float] = None) -> AuditEntry:
    """|Mv|_X <= M_norm |v|_V on random directions and the power-iteration maximizer."""
    cfg = cfg or AuditConfig()
    claimed = p.constants.M_norm if M_norm is None else float(M_norm)
    if p.trace.boundary_dim == 0:
        return AuditEntry("M operator norm", claimed, 0.0, True, note="no boundary space")
    seed = cfg.seed + 8
    rng = np.random.default_rng(seed)
    directions = [power_iteration(p.trace, p.metric).direction]
    while len(directions) < cfg.samples:
        directions.append(_gaussian(rng, p.dim, 1.0))

    def quotient(v):
        norm = p.metric.norm(v)
        return p.trace.x_norm(apply_trace(p.trace, v)) / norm if norm > 0 else 0.0

    ratios = _evaluate(quotient, directions, cfg.workers)
    k = int(np.argmax(ratios))
    passed = ratios[k] <= claimed * (1.0 + 1e-9)
    witness = None if passed else {"sample": k, "v": _as_list(directions[k])}
    return AuditEntry("M operator norm", claimed, float(ratios[k]), passed, len(directions), seed, witness)


# ---------------------------------------------------------------------------
# Smallness gates
# ---------------------------------------------------------------------------


def audit_h0(p: AbstractProblem, safety_factor: float = 1.05) -> AuditEntry:
    h = p.constants
    coupling = h.m_j * h.M_norm**2 + h.alpha_phi
    margin = smallness_margin(h)
    passed = coupling * safety_factor < h.m_A
    return AuditEntry(
        "smallness condition",
        h.m_A,
        coupling,
        passed,
        note=f"m_A - m_j*|M|^2 - alpha_phi = {margin:.6e} (safety factor {safety_factor})",
    )


def audit_contact_smallness(model, safety_factor: float = 1.05) -> AuditEntry:
    """k* m_jnu |gamma|^4 + p* L_mu |gamma|^2 < m_A with a safety factor."""
    small = model.smallness
    passed = small.lhs * safety_factor < small.rhs
    entry = AuditEntry(
        "contact smallness",
        small.rhs,
        small.lhs,
        passed,
        note=(
            f"lhs {small.lhs:.6e} vs m_A {small.rhs:.6e}: margin {small.margin:.6e} "
            f"({small.relative_margin:.1%}, |gamma|={small.gamma_norm:.6f})"
        ),
    )
    if not passed:
        logger.warning(f"{model.scenario.name}: {entry.note}")
    return entry


# ---------------------------------------------------------------------------
# Scalar laws, prototypes and history operators
# ---------------------------------------------------------------------------


def audit_laws(laws) -> List[AuditEntry]:
    entries = []
    for scan in laws.scans():
        witness = None if scan.passed or scan.witness is None else {"r": scan.witness}
        entries.append(AuditEntry(f"law: {scan.name}", scan.claimed, scan.observed, scan.passed, witness=witness))
    return entries


def audit_relaxed_monotonicity(p: AbstractProblem) -> Optional[AuditEntry]:
    if not isinstance(p.j, PrototypePotential):
        return None
    rep = check_relaxed_monotonicity(p.j)
    witness = None if rep.passed else {"r1": rep.witness[0], "r2": rep.witness[1]}
    return AuditEntry(
        "g relaxed monotonicity",
        rep.m_g,
        rep.min_quotient,
        rep.passed,
        rep.sample_count * (rep.sample_count - 1) // 2,
        witness=witness,
    )


def audit_histories(p: AbstractProblem, cfg: Optional[AuditConfig] = None) -> List[AuditEntry]:
    """Discrete Lipschitz bounds of R1..R4 on random trajectory pairs."""
    cfg = cfg or AuditConfig()
    seed = cfg.seed + 3
    rng = np.random.default_rng(seed)
    grid = TimeGrid(p.horizon, cfg.history_steps)
    pairs = []
    for k in range(cfg.history_pairs):
        r = _radius(cfg, p.scale, k)
        a = rng.standard_normal((grid.N + 1, p.dim)) * r
        b = rng.standard_normal((grid.N + 1, p.dim)) * r
        pairs.append((Trajectory(grid, a), Trajectory(grid, b)))
    h = p.constants
    entries = []
    for name, op, claimed in zip(
        ("R1", "R2", "R3", "R4"), p.histories.operators, (h.c_R1, h.c_R2, h.c_R3, h.c_R4)
    ):
        if isinstance(op, ZeroHistory):
            entries.append(AuditEntry(f"history {name} lipschitz", 0.0, 0.0, True, note="identically zero"))
            continue
        rep = audit_history_lipschitz(op, pairs, claimed, metric=p.metric)
        witness = None if rep.passed else {"pair": rep.worst_pair, "node": rep.worst_node}
        entries.append(
            AuditEntry(f"history {name} lipschitz", claimed, rep.max_quotient, rep.passed, rep.evaluated_nodes, seed, witness)
        )
    return entries


def construction_notes() -> List[AuditEntry]:
    return [
        AuditEntry("phi lower semicontinuity", None, None, True, note=BY_CONSTRUCTION),
        AuditEntry("j upper semicontinuity", None, None, True, note=BY_CONSTRUCTION),
    ]


# ---------------------------------------------------------------------------
# Full audit
# ---------------------------------------------------------------------------


def run_audit(p: AbstractProblem, cfg: Optional[AuditConfig] = None, model=None) -> AuditReport:
    """Every audit for an abstract problem; contact-only entries when `model` is given."""
    cfg = cfg or AuditConfig()
    report = AuditReport(p.name, cfg.seed, h0_margin=smallness_margin(p.constants))
    report.entries.append(audit_h0(p, cfg.safety_factor))
    if model is not None:
        contact = audit_contact_smallness(model, cfg.safety_factor)
        report.contact_margin = model.smallness.margin
        report.entries.append(contact)
        report.entries.extend(audit_laws(model.scenario.laws))
    report.entries.append(audit_operator_A(p, cfg))
    report.entries.append(audit_operator_growth(p, cfg))
    report.entries.append(audit_load_lipschitz(p, cfg))
    report.entries.append(audit_trace_norm(p, cfg))
    report.entries.append(audit_j_growth(p, cfg))
    report.entries.append(audit_j_coupling(p, cfg))
    report.entries.append(audit_multivalued_monotone(p, cfg))
    report.entries.extend(audit_potential_phi(p, cfg))
    relaxed = audit_relaxed_monotonicity(p)
    if relaxed is not None:
        report.entries.append(relaxed)
    report.entries.extend(audit_histories(p, cfg))
    report.entries.extend(construction_notes())
    failed = [e.name for e in report.failures()]
    if failed:
        logger.warning(f"{p.name}: audit failed: {failed}")
    else:
        logger.info(f"{p.name}: audit passed ({len(report.entries)} entries, seed {cfg.seed})")
    return report
