"""
Contact conditions recovered from a solved trajectory.

Tractions come from the discrete equilibrium residual r = A(t, lam, w) - f:
at a contact node r is the lumped boundary force, so dividing by the lumped
weight gives a traction per unit length. On gamma3 the recovered normal
stress is paired with eta = k(u_nu) * beta(u'_nu), the subgradient selection
the solver used; it is one admissible selection, not a unique multiplier.
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, List

import numpy as np

from ..core.errors import ConvergenceError, DimensionError
from ..core.spaces import apply_trace
from ..history.grid import Trajectory, cumulative_quadrature
from ..history.operators import displacements
from ..solvers.elliptic import FrozenData, default_step, fixed_point_residual
from .assembly import ContactModel

logger = logging.getLogger(__name__)

SLIDING_THRESHOLD = 1e-8
SELECTION_NOTE = "eta is the solver's subgradient selection k(u_nu)*beta(u'_nu), not a unique multiplier"


@dataclass
class ContactRow:
    t: float
    node: int
    part: str
    x: float
    y: float
    u_x: float
    u_y: float
    w_x: float
    w_y: float
    gap: float
    sigma_nu: float
    sigma_tau: float
    eta: float
    product: float
    cone_slack: float
    slip: float

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass
class ComplementaritySummary:
    max_feasibility: float = -np.inf
    max_sign: float = -np.inf
    max_product: float = 0.0
    min_cone_slack: float = np.inf
    max_angle: float = 0.0
    max_gamma4_residual: float = 0.0
    max_node_residual: float = 0.0
    sliding_samples: int = 0
    stick_samples: int = 0
    note: str = SELECTION_NOTE

    def passed(self, product_tol: float, tol: float = 1e-8, angle_tol: float = 1e-3) -> bool:
        return (
            self.max_feasibility <= tol
            and self.max_sign <= product_tol
            and self.max_product <= product_tol
            and self.min_cone_slack >= -product_tol
            and self.max_angle <= angle_tol
        )

    def to_dict(self) -> Dict:
        return {k: (float(v) if isinstance(v, (float, np.floating)) else v) for k, v in asdict(self).items()}


@dataclass
class ComplementarityReport:
    scenario: str
    rows: List[ContactRow] = field(default_factory=list)
    summary: ComplementaritySummary = field(default_factory=ComplementaritySummary)

    def to_dict(self) -> Dict:
        return {"scenario": self.scenario, "summary": self.summary.to_dict(), "rows": len(self.rows)}


def _part(in3: bool, in4: bool) -> str:
    if in3 and in4:
        return "gamma3+gamma4"
    return "gamma3" if in3 else "gamma4"


def complementarity_report(
    model: ContactModel,
    trajectory: Trajectory,
    residual_tol: float = 1e-6,
    noise_tol: float = 1e-6,
) -> ComplementarityReport:
    """Per-node, per-time contact quantities; refuses trajectories that do not solve their node problems.

    The sliding-angle test skips nodes whose friction bound or tangential force
    is below noise_tol * scale: there the direction of sigma_tau is rounding noise.
    """
    p, spaces, phi, laws = model.problem, model.spaces, model.phi, model.scenario.laws
    grid = trajectory.grid
    if trajectory.dim != p.dim:
        raise DimensionError(f"trajectory has dimension {trajectory.dim}, model {p.dim}")
    samples = trajectory.samples
    states = p.histories.states(samples, grid)
    rho = default_step(p)
    floor = noise_tol * p.scale

    residuals = []
    for n in range(grid.N + 1):
        d = FrozenData(grid.time(n), *states.at(n))
        residuals.append(fixed_point_residual(p, d, samples[n], rho))
    worst = int(np.argmax(residuals))
    if residuals[worst] > residual_tol:
        raise ConvergenceError(
            f"trajectory does not solve its node problems (residual {residuals[worst]:.3e} > {residual_tol:.1e})",
            stage="report",
            residual_history=residuals,
            node=worst,
        )

    rule = p.histories.rule
    u = displacements(samples, grid.dt, model.u0, grid.N, rule)
    s_nu, s_tau = phi.normal_sign, phi.tangent_sign
    slip = cumulative_quadrature(np.abs(s_tau * u[:, phi.tangent_dof]), grid.dt, rule)
    contact = spaces.contact_nodes
    in3, in4 = phi.slot3 >= 0, phi.slot4 >= 0
    points = spaces.mesh.points[contact]
    n3 = spaces.gamma3.size
    report = ComplementarityReport(model.scenario.name)
    summary = report.summary
    summary.max_node_residual = float(residuals[worst])

    for n in range(grid.N + 1):
        t = grid.time(n)
        lam, xi, eta, zeta = states.at(n)
        w = samples[n]
        r = p.operator.eval(t, lam, w) - p.load(t, xi)
        r_nu, r_tau = s_nu * r[phi.normal_dof], s_tau * r[phi.tangent_dof]
        w_nu, w_tau = phi.components(w)
        c_tau, _ = phi.coefficients(eta, w)
        pressure = np.where(in4, laws.p(eta[n3:][np.maximum(phi.slot4, 0)]), 0.0)
        selection = p.j.subgrad_select(t, zeta, apply_trace(p.trace, w))
        eta_sel = np.zeros(contact.size)
        eta_sel[in3] = selection[phi.slot3[in3]]

        sigma_nu = np.zeros(contact.size)
        sigma_nu[in3] = (r_nu[in3] + phi.w4[in3] * pressure[in3]) / phi.w3[in3]
        only4 = in4 & ~in3
        sigma_nu[only4] = r_nu[only4] / phi.w4[only4]
        length = phi.w3 + phi.w4
        sigma_tau = r_tau / length
        gap = w_nu - laws.gap
        product = np.where(in3, gap * (sigma_nu + eta_sel), 0.0)
        slack = (c_tau - np.abs(r_tau)) / length

        if np.any(in3):
            summary.max_feasibility = max(summary.max_feasibility, float(np.max(gap[in3])))
            summary.max_sign = max(summary.max_sign, float(np.max(sigma_nu[in3] + eta_sel[in3])))
            summary.max_product = max(summary.max_product, float(np.max(np.abs(product[in3]))))
        if np.any(only4):
            g4 = np.abs(sigma_nu[only4] + pressure[only4])
            summary.max_gamma4_residual = max(summary.max_gamma4_residual, float(np.max(g4)))
        summary.min_cone_slack = min(summary.min_cone_slack, float(np.min(slack)))
        sliding = np.abs(w_tau) > SLIDING_THRESHOLD
        summary.sliding_samples += int(np.sum(sliding))
        summary.stick_samples += int(np.sum(~sliding))
        for k in np.flatnonzero(sliding):
            if c_tau[k] <= floor or abs(r_tau[k]) <= floor:
                continue
            cosine = -r_tau[k] * w_tau[k] / (abs(r_tau[k]) * abs(w_tau[k]))
            summary.max_angle = max(summary.max_angle, float(np.arccos(np.clip(cosine, -1.0, 1.0))))

        for k, node in enumerate(contact):
            dof = spaces.node_dof[node]
            report.rows.append(
                ContactRow(
                    t=t,
                    node=int(node),
                    part=_part(bool(in3[k]), bool(in4[k])),
                    x=float(points[k, 0]),
                    y=float(points[k, 1]),
                    u_x=float(u[n, dof]),
                    u_y=float(u[n, dof + 1]),
                    w_x=float(w[dof]),
                    w_y=float(w[dof + 1]),
                    gap=float(gap[k]),
                    sigma_nu=float(sigma_nu[k]),
                    sigma_tau=float(sigma_tau[k]),
                    eta=float(eta_sel[k]),
                    product=float(product[k]),
                    cone_slack=float(slack[k]),
                    slip=float(slip[n, k]),
                )
            )

    logger.info(
        f"{report.scenario}: complementarity max|product|={summary.max_product:.3e} "
        f"feasibility={summary.max_feasibility:.3e} min cone slack={summary.min_cone_slack:.3e} "
        f"({summary.sliding_samples} sliding, {summary.stick_samples} stick samples)"
    )
    return report


def energy_gap(model: ContactModel, trajectory: Trajectory) -> float:
    """Minimum over nodes of <A eps(w), eps(w)> - 2 theta1 |w|^2."""
    return float(np.min(model.viscous_power_gap(trajectory.samples)))
