"""
Assembly of the viscoelastic contact model and its abstract form.

Velocities w are nodal P1 fields on the unclamped nodes, two DoFs per node
in global (x, y) components. The abstract bundle is

    A(t, lam, v)   = S_A v + C lam          S_A = sum_e a_e B_e^T D_A B_e, C = B^T diag(a)
    f(t)           = profile(t) * (body + traction + nodal loads)
    phi(eta, w, v) = sum_gamma3 w3 F_b(eta1) |v_tau|
                     + sum_gamma4 w4 (p(eta2) v_nu + mu(|w_tau|) p(eta2) |v_tau|)
    j(zeta, x)     = sum_gamma3 w3 k(zeta) j_nu(x)        x = normal velocity on gamma3
    K              = {v : v_nu <= g on gamma3}
    R1 = B-stress of the displacement plus relaxation memory, R2 = 0,
    R3 = (accumulated slip on gamma3, normal displacement on gamma4),
    R4 = normal displacement on gamma3.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from ..core.errors import MeshError
from ..core.potentials import ConvexPotential, PrototypePotential
from ..core.problem import AbstractProblem, AffineLoad, AffineOperator, HypothesisConstants
from ..core.spaces import ConstraintSet, EnergyMetric, TraceOperator, as_array, power_iteration
from ..history.grid import QuadratureRule, TimeGrid
from ..history.operators import (
    DisplacementHistory,
    HistoryBundle,
    SlipNormalHistory,
    VolterraHistory,
    ZeroHistory,
)
from .laws import BoundaryLaws, Material
from .mesh import RectMesh
from .scenario import ContactScenario

logger = logging.getLogger(__name__)

SQRT2 = np.sqrt(2.0)


# ---------------------------------------------------------------------------
# Spaces
# ---------------------------------------------------------------------------


def _axis(direction: np.ndarray):
    comp = int(np.argmax(np.abs(direction)))
    if not np.isclose(abs(direction[comp]), 1.0):
        raise MeshError("contact directions must be aligned with the coordinate axes")
    return comp, float(np.sign(direction[comp]))


@dataclass(frozen=True, eq=False)
class ContactSpaces:
    """Discrete V with its metric, strain map, and boundary bookkeeping."""

    mesh: RectMesh
    node_dof: np.ndarray
    strain: np.ndarray
    strain_weights: np.ndarray
    metric: EnergyMetric
    gamma3: np.ndarray
    gamma4: np.ndarray
    w3: np.ndarray
    w4: np.ndarray
    contact_nodes: np.ndarray
    normal_dof: np.ndarray
    normal_sign: float
    tangent_dof: np.ndarray
    tangent_sign: float
    normal_trace: TraceOperator
    boundary_trace: TraceOperator

    @property
    def n_dofs(self) -> int:
        return self.metric.dim

    @property
    def n_elements(self) -> int:
        return self.mesh.triangles.shape[0]

    def component_map(self, nodes: np.ndarray, which: str) -> np.ndarray:
        """Rows extracting the normal or tangential velocity of the given nodes."""
        comp, sign = self._component(which)
        rows = np.zeros((len(nodes), self.n_dofs))
        rows[np.arange(len(nodes)), self.node_dof[nodes] + comp] = sign
        return rows

    def _component(self, which: str):
        if which == "normal":
            return _axis(self.mesh.contact_normal())
        if which == "tangent":
            return _axis(self.mesh.contact_tangent())
        raise ValueError(f"component must be 'normal' or 'tangent', got {which!r}")

    def nodal(self, v) -> np.ndarray:
        """(n_nodes, 2) array of nodal vectors; clamped nodes are zero."""
        v = as_array(v)
        out = np.zeros((self.mesh.n_nodes, 2))
        free = self.node_dof >= 0
        out[free, 0] = v[self.node_dof[free]]
        out[free, 1] = v[self.node_dof[free] + 1]
        return out

    def strains(self, v) -> np.ndarray:
        """(n_el, 3) Mandel strains of a DoF vector."""
        return (self.strain @ as_array(v)).reshape(-1, 3)


def _strain_matrix(mesh: RectMesh, node_dof: np.ndarray) -> np.ndarray:
    n_el = mesh.triangles.shape[0]
    n_dofs = 2 * int(np.sum(node_dof >= 0))
    grads = mesh.gradients
    strain = np.zeros((3 * n_el, n_dofs))
    for e, tri in enumerate(mesh.triangles):
        for local, node in enumerate(tri):
            d = node_dof[node]
            if d < 0:
                continue
            b, c = grads[e, local]
            strain[3 * e, d] += b
            strain[3 * e + 1, d + 1] += c
            strain[3 * e + 2, d] += c / SQRT2
            strain[3 * e + 2, d + 1] += b / SQRT2
    return strain


def assemble_spaces(scn: ContactScenario) -> ContactSpaces:
    mesh = scn.mesh
    mesh.check_partition()
    clamped = set(mesh.clamped_nodes.tolist())
    node_dof = -np.ones(mesh.n_nodes, dtype=int)
    k = 0
    for n in range(mesh.n_nodes):
        if n not in clamped:
            node_dof[n] = 2 * k
            k += 1

    strain = _strain_matrix(mesh, node_dof)
    weights = np.repeat(mesh.areas, 3)
    gram = strain.T @ (weights[:, None] * strain)
    metric = EnergyMetric(gram)

    lw3, lw4 = mesh.lumped_weights("gamma3"), mesh.lumped_weights("gamma4")
    gamma3 = np.array([n for n in np.flatnonzero(lw3 > 0) if n not in clamped], dtype=int)
    gamma4 = np.array([n for n in np.flatnonzero(lw4 > 0) if n not in clamped], dtype=int)
    if gamma3.size == 0 or gamma4.size == 0:
        raise MeshError("contact parts have no free nodes")
    contact = np.union1d(gamma3, gamma4)

    n_comp, n_sign = _axis(mesh.contact_normal())
    t_comp, t_sign = _axis(mesh.contact_tangent())

    n3 = np.zeros((gamma3.size, k * 2))
    n3[np.arange(gamma3.size), node_dof[gamma3] + n_comp] = n_sign
    normal_trace = TraceOperator(n3, lw3[gamma3])

    lw = mesh.boundary_weights()
    boundary = np.array([n for n in np.flatnonzero(lw > 0) if n not in clamped], dtype=int)
    rows = np.zeros((2 * boundary.size, 2 * k))
    rows[2 * np.arange(boundary.size), node_dof[boundary]] = 1.0
    rows[2 * np.arange(boundary.size) + 1, node_dof[boundary] + 1] = 1.0
    boundary_trace = TraceOperator(rows, np.repeat(lw[boundary], 2))

    logger.debug(f"{scn.name}: {2 * k} DoFs, {mesh.triangles.shape[0]} elements, "
                 f"{gamma3.size} + {gamma4.size} contact nodes")
    return ContactSpaces(
        mesh=mesh,
        node_dof=node_dof,
        strain=strain,
        strain_weights=weights,
        metric=metric,
        gamma3=gamma3,
        gamma4=gamma4,
        w3=lw3[gamma3],
        w4=lw4[gamma4],
        contact_nodes=contact,
        normal_dof=node_dof[contact] + n_comp,
        normal_sign=n_sign,
        tangent_dof=node_dof[contact] + t_comp,
        tangent_sign=t_sign,
        normal_trace=normal_trace,
        boundary_trace=boundary_trace,
    )


# ---------------------------------------------------------------------------
# Constitutive law
# ---------------------------------------------------------------------------


def constitutive_stress(material: Material, eps_velocity, eps_displacement, memory=None) -> np.ndarray:
    """sigma = A eps(u') + B eps(u) + memory, per element in Mandel form."""
    eps_velocity = np.asarray(eps_velocity, dtype=float)
    eps_displacement = np.asarray(eps_displacement, dtype=float)
    if eps_velocity.shape != eps_displacement.shape or eps_velocity.shape[-1] != 3:
        raise ValueError("strain arrays must share a shape ending in 3")
    sigma = eps_velocity @ material.viscosity.T + eps_displacement @ material.elasticity.T
    if memory is not None:
        memory = np.asarray(memory, dtype=float)
        if memory.shape != sigma.shape:
            raise ValueError("memory stress must match the strain shape")
        sigma = sigma + memory
    return sigma


def relaxation_memory(
    material: Material,
    strain_rates: np.ndarray,
    grid: TimeGrid,
    n: int,
    rule: QuadratureRule = QuadratureRule.LEFT_RECTANGLE,
) -> np.ndarray:
    """Quadrature of kappa*exp(-(t_n - s)/tau_r) B eps(u'(s)) over [0, t_n].

    strain_rates has shape (N+1, n_el, 3); returns (n_el, 3).
    """
    rates = np.asarray(strain_rates, dtype=float)
    n_el = rates.shape[1]
    op = VolterraHistory(
        static_map=None,
        kernel_map=np.kron(np.eye(n_el), material.elasticity),
        kernel=material.relaxation_kernel,
        u0=np.zeros(3 * n_el),
        rule=rule,
    )
    return op.evaluate(rates.reshape(grid.N + 1, -1), grid, n).reshape(n_el, 3)


# ---------------------------------------------------------------------------
# Contact potential phi
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ContactFrictionPotential(ConvexPotential):
    """Friction on gamma3 plus compliance and Coulomb friction on gamma4, with the gap cap folded in.

    Per contact node the potential reads c_tau |v_tau| + c_nu v_nu, so the
    proximal map is a soft threshold on the tangential DoF and a shift
    followed by the cap on the normal DoF.
    """

    constraint: ConstraintSet
    laws: BoundaryLaws
    normal_dof: np.ndarray
    normal_sign: float
    tangent_dof: np.ndarray
    tangent_sign: float
    w3: np.ndarray
    w4: np.ndarray
    slot3: np.ndarray
    slot4: np.ndarray
    n3: int

    @property
    def active_dofs(self):
        return np.concatenate([self.normal_dof, self.tangent_dof])

    @property
    def capped(self) -> np.ndarray:
        return self.slot3 >= 0

    def coefficients(self, eta, w):
        eta = as_array(eta)
        eta1, eta2 = eta[: self.n3], eta[self.n3 :]
        fb = np.where(self.capped, self.laws.F_b(eta1[np.maximum(self.slot3, 0)]), 0.0)
        has4 = self.slot4 >= 0
        pv = np.where(has4, self.laws.p(eta2[np.maximum(self.slot4, 0)]), 0.0) if eta2.size else np.zeros_like(fb)
        slip_rate = np.abs(as_array(w)[self.tangent_dof])
        c_tau = self.w3 * fb + self.w4 * self.laws.mu(slip_rate) * pv
        c_nu = self.w4 * pv
        return c_tau, c_nu

    def components(self, v):
        v = as_array(v)
        return self.normal_sign * v[self.normal_dof], self.tangent_sign * v[self.tangent_dof]

    def value(self, t, eta, w, v):
        c_tau, c_nu = self.coefficients(eta, w)
        v_nu, v_tau = self.components(v)
        return float(np.sum(c_tau * np.abs(v_tau) + c_nu * v_nu))

    def prox(self, t, eta, w_frozen, x, rho):
        x = as_array(x)
        c_tau, c_nu = self.coefficients(eta, w_frozen)
        x_nu, x_tau = self.components(x)
        y_tau = np.sign(x_tau) * np.maximum(np.abs(x_tau) - rho * c_tau, 0.0)
        y_nu = x_nu - rho * c_nu
        y_nu = np.where(self.capped, np.minimum(y_nu, self.laws.gap), y_nu)
        y = np.array(x, dtype=float, copy=True)
        y[self.tangent_dof] = self.tangent_sign * y_tau
        y[self.normal_dof] = self.normal_sign * y_nu
        return y


# ---------------------------------------------------------------------------
# Model
# ---------------------------------------------------------------------------


@dataclass
class ContactSmallness:
    """Both sides of k* m_jnu |gamma|^4 + p* L_mu |gamma|^2 < m_A."""

    lhs: float
    rhs: float
    gamma_norm: float

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def relative_margin(self) -> float:
        return self.margin / self.rhs

    def to_dict(self) -> Dict[str, float]:
        return {
            "lhs": self.lhs,
            "rhs": self.rhs,
            "margin": self.margin,
            "relative_margin": self.relative_margin,
            "gamma_norm": self.gamma_norm,
        }


def contact_smallness(material: Material, laws: BoundaryLaws, gamma_norm: float) -> ContactSmallness:
    lhs = laws.damper_max * laws.m_jnu * gamma_norm**4 + laws.compliance_max * laws.L_mu * gamma_norm**2
    return ContactSmallness(float(lhs), material.m_viscosity, float(gamma_norm))


@dataclass(frozen=True, eq=False)
class ContactModel:
    scenario: ContactScenario
    spaces: ContactSpaces
    problem: AbstractProblem
    viscosity_stiffness: np.ndarray
    load_reference: np.ndarray
    u0: np.ndarray
    gamma_norm: float
    smallness: ContactSmallness
    phi: ContactFrictionPotential = field(repr=False, default=None)

    def load(self, t: float) -> np.ndarray:
        return self.scenario.loads.factor(t) * self.load_reference

    def viscous_power_gap(self, samples: np.ndarray) -> np.ndarray:
        """<A eps(w), eps(w)> - 2 theta1 |w|^2 at every row of samples."""
        samples = np.atleast_2d(samples)
        power = np.einsum("ni,ij,nj->n", samples, self.viscosity_stiffness, samples)
        energy = np.einsum("ni,ij,nj->n", samples, self.spaces.metric.gram, samples)
        return power - self.scenario.material.m_viscosity * energy


def _load_vector(scn: ContactScenario, spaces: ContactSpaces) -> np.ndarray:
    mesh = scn.mesh
    rot = mesh.rotation
    nodal = np.zeros((mesh.n_nodes, 2))
    body = rot @ scn.loads.body
    for e, tri in enumerate(mesh.triangles):
        nodal[tri] += mesh.areas[e] / 3.0 * body
    for side, traction in scn.loads.traction.items():
        force = rot @ traction
        for a, b in mesh.side_edges[side]:
            half = mesh.edge_length(a, b) / 2.0
            nodal[a] += half * force
            nodal[b] += half * force
    for nodes, force in scn.loads.nodal:
        for n in nodes:
            nodal[n] += rot @ force
    free = spaces.node_dof >= 0
    out = np.zeros(spaces.n_dofs)
    out[spaces.node_dof[free]] = nodal[free, 0]
    out[spaces.node_dof[free] + 1] = nodal[free, 1]
    return out


def _initial_displacement(scn: ContactScenario, spaces: ContactSpaces) -> np.ndarray:
    mesh = scn.mesh
    direction = mesh.rotation @ scn.u0_slope
    u0 = np.zeros(spaces.n_dofs)
    free = np.flatnonzero(spaces.node_dof >= 0)
    x_ref = mesh.reference_points[free, 0]
    u0[spaces.node_dof[free]] = x_ref * direction[0]
    u0[spaces.node_dof[free] + 1] = x_ref * direction[1]
    return u0


def assemble_model(scn: ContactScenario, rule: QuadratureRule = QuadratureRule.LEFT_RECTANGLE) -> ContactModel:
    """Assemble the contact problem and its hypothesis constants."""
    spaces = assemble_spaces(scn)
    mat, laws = scn.material, scn.laws
    n_el = spaces.n_elements
    weights = spaces.strain_weights
    weighted = spaces.strain.T * weights[None, :]
    stiffness = weighted @ np.kron(np.eye(n_el), mat.viscosity) @ spaces.strain
    operator = AffineOperator(stiffness, coupling=weighted)

    load_ref = _load_vector(scn, spaces)
    loads = scn.loads
    load = AffineLoad(lambda t: loads.factor(t) * load_ref)
    u0 = _initial_displacement(scn, spaces)

    contact = spaces.contact_nodes
    gamma3, gamma4 = spaces.gamma3, spaces.gamma4
    constraint = ConstraintSet.upper_bound(
        spaces.n_dofs,
        spaces.node_dof[gamma3] + _axis(scn.mesh.contact_normal())[0],
        laws.gap,
        spaces.normal_sign,
    )
    slot3 = np.array([np.flatnonzero(gamma3 == n)[0] if n in gamma3 else -1 for n in contact])
    slot4 = np.array([np.flatnonzero(gamma4 == n)[0] if n in gamma4 else -1 for n in contact])
    phi = ContactFrictionPotential(
        constraint=constraint,
        laws=laws,
        normal_dof=spaces.normal_dof,
        normal_sign=spaces.normal_sign,
        tangent_dof=spaces.tangent_dof,
        tangent_sign=spaces.tangent_sign,
        w3=np.where(slot3 >= 0, spaces.w3[np.maximum(slot3, 0)], 0.0),
        w4=np.where(slot4 >= 0, spaces.w4[np.maximum(slot4, 0)], 0.0),
        slot3=slot3,
        slot4=slot4,
        n3=gamma3.size,
    )
    j = PrototypePotential(laws.j_nu, laws.damper, spaces.w3)

    stress_map = np.kron(np.eye(n_el), mat.elasticity) @ spaces.strain
    t3 = spaces.component_map(gamma3, "tangent")
    histories = HistoryBundle(
        R1=VolterraHistory(stress_map, stress_map, mat.relaxation_kernel, u0, rule, weights),
        R2=ZeroHistory(gamma3.size, spaces.w3, rule),
        R3=SlipNormalHistory(t3, spaces.component_map(gamma4, "normal"), u0, rule, spaces.w3, spaces.w4),
        R4=DisplacementHistory(spaces.normal_trace.matrix, u0, rule, spaces.w3),
    )

    gamma_est = power_iteration(spaces.boundary_trace, spaces.metric)
    m_est = power_iteration(spaces.normal_trace, spaces.metric)
    gamma = gamma_est.bound
    T = scn.grid.T
    constants = HypothesisConstants(
        m_A=mat.m_viscosity,
        m_A_bar=1.0,
        a0_max=0.0,
        a1=1.0,
        a2=mat.viscosity_norm,
        L_f=0.0,
        alpha_phi=laws.compliance_max * laws.L_mu * gamma**2,
        beta_phi=(laws.L_Fb + laws.L_p + laws.friction_coefficient * laws.L_p) * gamma,
        c0j_max=laws.damper_max * laws.c0_bar * np.sqrt(scn.mesh.measure("gamma3")),
        c1j=0.0,
        c2j=laws.damper_max * laws.j_nu.c1,
        m_j=laws.damper_max * laws.m_jnu * gamma**2,
        m_1=laws.c0_bar * laws.L_k * gamma,
        c_R1=mat.elasticity_norm * (1.0 + mat.kappa),
        c_R2=0.0,
        c_R3=gamma * np.sqrt(1.0 + T**2),
        c_R4=gamma,
        M_norm=m_est.bound,
        c_phi1_max=gamma
        * (
            laws.F_sup * np.sqrt(scn.mesh.measure("gamma3"))
            + laws.compliance_max * (1.0 + laws.friction_coefficient) * np.sqrt(scn.mesh.measure("gamma4"))
        ),
    )
    smallness = contact_smallness(mat, laws, gamma)
    problem = AbstractProblem(
        name=scn.name,
        metric=spaces.metric,
        trace=spaces.normal_trace,
        constraint=constraint,
        operator=operator,
        load=load,
        phi=phi,
        j=j,
        histories=histories,
        constants=constants,
        horizon=T,
        scale=scn.load_scale,
        metadata={"scenario": scn.name, "contact_smallness": smallness.to_dict()},
    )
    if smallness.margin <= 0 or problem.margin <= 0:
        logger.warning(
            f"{scn.name}: smallness condition fails (contact margin {smallness.margin:.3e}, "
            f"abstract margin {problem.margin:.3e}); solves will be refused"
        )
    else:
        logger.info(
            f"{scn.name}: assembled {spaces.n_dofs} DoFs, |gamma|={gamma:.4f}, |M|={m_est.bound:.4f}, "
            f"smallness margin {smallness.relative_margin:.1%}"
        )
    return ContactModel(scn, spaces, problem, stiffness, load_ref, u0, gamma, smallness, phi)


def build_abstract(scn: ContactScenario, rule: QuadratureRule = QuadratureRule.LEFT_RECTANGLE) -> AbstractProblem:
    return assemble_model(scn, rule).problem


def boundary_trace_norm(spaces: ContactSpaces) -> float:
    return power_iteration(spaces.boundary_trace, spaces.metric).bound


def default_model(scn: Optional[ContactScenario] = None) -> ContactModel:
    return assemble_model(scn or ContactScenario())
