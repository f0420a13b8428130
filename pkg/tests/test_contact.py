from dataclasses import replace

import numpy as np
import pytest
import yaml

from src.contact import (
    BoundaryLaws,
    ContactScenario,
    RectMesh,
    assemble_model,
    complementarity_report,
    energy_gap,
    load_scenario,
    parse_scenario,
)
from src.contact.assembly import constitutive_stress, relaxation_memory
from src.core.errors import ConvergenceError, MeshError, ScenarioError, SmallnessViolation
from src.history.grid import TimeGrid, Trajectory
from src.reporting import read_table, write_contact_rows
from src.solvers.elliptic import SolveConfig
from src.solvers.evolution import time_march, uniqueness_probe

from .conftest import SCENARIOS, evolution

# -- mesh --------------------------------------------------------------------


@pytest.mark.parametrize("rotation", [0.0, 90.0, 180.0, 270.0])
def test_mesh_geometry(rotation):
    mesh = RectMesh(length=2.0, height=1.0, nx=4, ny=3, rotation_deg=rotation)
    assert mesh.n_nodes == 20
    assert np.isclose(mesh.areas.sum(), 2.0)
    assert np.all(mesh.areas > 0)
    # P1 shape-function gradients sum to zero on every element
    assert np.allclose(mesh.gradients.sum(axis=1), 0.0)
    mesh.check_partition()


def test_mesh_tags_and_weights():
    mesh = RectMesh(nx=8, ny=4)
    assert np.isclose(mesh.measure("gamma1"), 1.0)
    assert np.isclose(mesh.measure("gamma2"), 3.0)
    assert np.isclose(mesh.measure("gamma3"), 1.0)
    assert np.isclose(mesh.measure("gamma4"), 1.0)
    for tag in ("gamma1", "gamma2", "gamma3", "gamma4"):
        assert np.isclose(mesh.lumped_weights(tag).sum(), mesh.measure(tag))
    assert np.isclose(mesh.boundary_weights().sum(), 6.0)
    assert mesh.clamped_nodes.tolist() == [mesh.node_id(0, j) for j in range(5)]
    with pytest.raises(MeshError):
        mesh.lumped_weights("gamma5")


def test_mesh_rejects_bad_input():
    with pytest.raises(MeshError):
        RectMesh(rotation_deg=45.0)
    with pytest.raises(MeshError):
        RectMesh(nx=1)
    with pytest.raises(MeshError):
        RectMesh(length=-1.0)


def test_rotated_contact_frame():
    mesh = RectMesh(rotation_deg=90.0)
    assert np.allclose(mesh.contact_normal(), [1.0, 0.0])
    assert np.allclose(mesh.contact_tangent(), [0.0, 1.0])
    normals = mesh.node_normals()
    corner = normals[mesh.node_id(mesh.nx, 0)]
    assert np.isclose(np.linalg.norm(corner), 1.0)


# -- laws --------------------------------------------------------------------


def test_default_law_scans_pass():
    scans = BoundaryLaws().scans()
    assert len(scans) == 13
    assert all(s.passed for s in scans), [s.name for s in scans if not s.passed]


def test_law_values():
    laws = BoundaryLaws()
    assert laws.p(-1.0) == 0.0
    assert np.isclose(laws.p(10.0), laws.compliance_max)
    assert np.isclose(laws.F_b(-3.0), laws.friction_bound)
    assert laws.F_b(100.0) <= laws.F_sup
    assert np.isclose(laws.mu(0.0), laws.friction_coefficient)
    assert laws.damper_min <= float(laws.k(0.3)) <= laws.damper_max


def test_law_validation():
    with pytest.raises(ValueError):
        BoundaryLaws(damper_min=2.0, damper_max=1.0)
    with pytest.raises(ValueError):
        BoundaryLaws(gap=0.0)
    with pytest.raises(ValueError):
        BoundaryLaws(friction_bound=-1.0)


# -- scenarios ---------------------------------------------------------------


def test_demo_scenario_loads(demo_scenario):
    assert demo_scenario.name == "demo"
    assert demo_scenario.mesh.nx == 8 and demo_scenario.mesh.ny == 4
    assert demo_scenario.grid.N == 40
    assert demo_scenario.load_scale > 0


def test_unknown_key_reports_location():
    text = "name: broken\nmesh:\n  nx: 4\n  colour: red\n"
    with pytest.raises(ScenarioError) as info:
        parse_scenario(text, "broken.yaml")
    message = str(info.value)
    assert "mesh.colour" in message
    assert "line 4, column 3" in message
    assert "broken.yaml" in message


def test_duplicate_and_invalid_sections():
    with pytest.raises(ScenarioError, match="duplicate key"):
        parse_scenario("time:\n  T: 1.0\n  T: 2.0\n")
    with pytest.raises(ScenarioError, match="invalid mesh"):
        parse_scenario("mesh:\n  rotation_deg: 30\n")
    with pytest.raises(ScenarioError, match="invalid loads"):
        parse_scenario("loads:\n  nodal:\n    - nodes: [9999]\n      force: [0, 1]\n")


def test_malformed_yaml_and_missing_file(tmp_path):
    with pytest.raises(ScenarioError, match="malformed YAML"):
        parse_scenario("mesh: [1, 2\n")
    with pytest.raises(ScenarioError, match="empty"):
        parse_scenario("")
    with pytest.raises(ScenarioError, match="cannot read scenario"):
        load_scenario(tmp_path / "absent.yaml")


def test_scenario_roundtrip(demo_scenario):
    text = yaml.safe_dump(demo_scenario.to_dict())
    again = parse_scenario(text)
    assert again.to_dict() == demo_scenario.to_dict()


# -- assembly ----------------------------------------------------------------


def test_spaces_dimensions(demo_model):
    spaces = demo_model.spaces
    # 9 x 5 nodes minus the clamped left column
    assert spaces.n_dofs == 2 * (45 - 5)
    assert spaces.n_elements == 64
    assert spaces.gamma3.size == 4
    # node (4, 0) belongs to both contact parts
    assert spaces.gamma4.size == 5
    assert spaces.contact_nodes.size == 8
    assert np.isclose(spaces.w3.sum() + spaces.mesh.lumped_weights("gamma3")[0], 1.0)
    assert np.linalg.eigvalsh(spaces.metric.gram).min() > 0


def test_linear_fields_have_exact_strains():
    scn = ContactScenario(mesh=RectMesh(nx=4, ny=2))
    stretch = assemble_model(replace(scn, u0_slope=np.array([1.0, 0.0])))
    assert np.allclose(stretch.spaces.strains(stretch.u0), [1.0, 0.0, 0.0])
    shear = assemble_model(replace(scn, u0_slope=np.array([0.0, 1.0])))
    assert np.allclose(shear.spaces.strains(shear.u0), [0.0, 0.0, 1.0 / np.sqrt(2.0)])


def test_constitutive_stress():
    mat = ContactScenario().material
    eps = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    sigma = constitutive_stress(mat, eps, np.zeros_like(eps))
    assert np.allclose(sigma, eps @ mat.viscosity.T)
    with pytest.raises(ValueError):
        constitutive_stress(mat, eps, np.zeros((3, 3)))
    with pytest.raises(ValueError):
        constitutive_stress(mat, eps, eps, memory=np.zeros((1, 3)))


def test_relaxation_memory_of_constant_rate():
    mat = ContactScenario().material
    grid = TimeGrid(1.0, 200)
    rates = np.tile([1.0, 0.0, 0.0], (grid.N + 1, 1, 1))
    memory = relaxation_memory(mat, rates, grid, grid.N)
    exact = mat.kappa * mat.tau_r * (1.0 - np.exp(-1.0 / mat.tau_r)) * (mat.elasticity @ [1.0, 0.0, 0.0])
    assert np.allclose(memory[0], exact, rtol=2e-2)


def test_viscous_power_dominates_energy(demo_model, rng):
    gaps = demo_model.viscous_power_gap(rng.standard_normal((50, demo_model.problem.dim)))
    assert np.all(gaps >= -1e-9)


def test_contact_prox_is_feasible_minimizer(small_model, rng):
    phi, p = small_model.phi, small_model.problem
    n_eta = p.histories.dims[2]
    rho = 0.7
    for _ in range(10):
        eta = rng.uniform(0.0, 1.0, n_eta)
        w = rng.standard_normal(p.dim) * 0.1
        x = rng.standard_normal(p.dim) * 0.2
        y = phi.prox(0.0, eta, w, x, rho)
        assert p.constraint.contains(y, tol=1e-12)

        def objective(z):
            return rho * phi.value(0.0, eta, w, z) + 0.5 * float(np.sum((z - x) ** 2))

        best = objective(y)
        for _ in range(20):
            z = p.constraint.project(y + 1e-3 * rng.standard_normal(p.dim))
            assert objective(z) >= best - 1e-12


# -- smallness gate ----------------------------------------------------------


def test_default_smallness_margin(demo_model):
    small = demo_model.smallness
    assert small.relative_margin >= 0.2
    assert demo_model.problem.margin > 0
    assert np.isclose(small.rhs, 2.0 * demo_model.scenario.material.theta1)


def test_large_friction_is_refused(small_model):
    scn = small_model.scenario
    mat, laws = scn.material, scn.laws
    # enough friction to push p* L_mu |gamma|^2 alone past m_A
    mu = 2.0 * mat.m_viscosity / (laws.compliance_max * small_model.gamma_norm**2)
    model = assemble_model(scn.with_laws(friction_coefficient=mu))
    assert model.smallness.margin < 0
    assert model.problem.margin < 0
    with pytest.raises(SmallnessViolation):
        time_march(model.problem, evolution(scn.grid))


# -- solves ------------------------------------------------------------------


def test_zero_load_stays_at_rest(zero_model):
    run = time_march(zero_model.problem, evolution(zero_model.scenario.grid))
    assert np.max(np.abs(run.trajectory.samples)) <= 1e-12
    report = complementarity_report(zero_model, run.trajectory)
    assert report.summary.max_product <= 1e-12


def test_complementarity_on_small_model(small_model):
    run = time_march(small_model.problem, evolution(small_model.scenario.grid))
    report = complementarity_report(small_model, run.trajectory)
    s = report.summary
    scale = small_model.problem.scale
    assert s.passed(product_tol=1e-6 * scale)
    assert s.max_feasibility <= 1e-8
    assert s.min_cone_slack >= -1e-6 * scale
    assert s.sliding_samples + s.stick_samples == (small_model.scenario.grid.N + 1) * small_model.spaces.contact_nodes.size
    assert len(report.rows) == s.sliding_samples + s.stick_samples
    assert energy_gap(small_model, run.trajectory) >= -1e-9


def test_report_refuses_non_solutions(small_model):
    grid = small_model.scenario.grid
    bogus = Trajectory(grid, np.full((grid.N + 1, small_model.problem.dim), 0.3))
    with pytest.raises(ConvergenceError):
        complementarity_report(small_model, bogus)


@pytest.mark.slow
def test_demo_uniqueness(demo_model):
    grid = demo_model.scenario.grid
    cfg = evolution(grid, picard_tol=1e-8)
    rng = np.random.default_rng(0)
    shape = (grid.N + 1, demo_model.problem.dim)
    inits = [Trajectory(grid, demo_model.problem.scale * rng.standard_normal(shape)) for _ in range(5)]
    report = uniqueness_probe(demo_model.problem, cfg, inits)
    assert report.max_distance <= 100 * cfg.picard_tol


@pytest.mark.slow
def test_demo_complementarity_tightens_with_inner_tolerance(demo_model):
    products = []
    for tol in (1e-4, 1e-6, 1e-8):
        cfg = evolution(demo_model.scenario.grid, frozen_cfg=SolveConfig(inner_tol=tol))
        run = time_march(demo_model.problem, cfg)
        report = complementarity_report(demo_model, run.trajectory, residual_tol=1e-3)
        products.append(report.summary.max_product)
    assert products[1] <= products[0] + 1e-12
    assert products[2] <= products[1] + 1e-12
    assert products[2] <= 1e-6 * demo_model.problem.scale


def test_rotated_body_gives_rotated_velocities(small_model):
    scn = small_model.scenario.with_grid(TimeGrid(1.0, 4))
    base = assemble_model(scn)
    turned = assemble_model(scn.with_mesh(rotation_deg=90.0))
    cfg = evolution(scn.grid, frozen_cfg=SolveConfig(inner_tol=1e-12))
    w = time_march(base.problem, cfg).trajectory.samples
    w_rot = time_march(turned.problem, cfg).trajectory.samples
    rot = turned.scenario.mesh.rotation
    for n in range(scn.grid.N + 1):
        expected = base.spaces.nodal(w[n]) @ rot.T
        assert np.allclose(turned.spaces.nodal(w_rot[n]), expected, atol=1e-8)


def test_demo_friction_law_holds(demo_model):
    run = time_march(demo_model.problem, evolution(demo_model.scenario.grid))
    report = complementarity_report(demo_model, run.trajectory)
    s = report.summary
    assert s.passed(product_tol=1e-6 * demo_model.problem.scale)
    assert s.max_angle <= 1e-3


def test_low_load_sticks_on_gamma3():
    model = assemble_model(
        load_scenario(SCENARIOS / "low_load.yaml").with_mesh(nx=4, ny=2).with_grid(TimeGrid(1.0, 10))
    )
    run = time_march(model.problem, evolution(model.scenario.grid))
    report = complementarity_report(model, run.trajectory)
    s = report.summary
    assert s.passed(product_tol=1e-6 * model.problem.scale)
    assert s.stick_samples > 0 and s.sliding_samples > 0
    gamma3 = [row for row in report.rows if row.part == "gamma3"]
    assert gamma3
    for row in gamma3:
        # tangent is x for an unrotated body
        assert abs(row.w_x) <= 1e-8
        assert row.cone_slack >= -1e-6 * model.problem.scale


def test_contact_prox_with_vanishing_step_is_projection(small_model, rng):
    phi, p = small_model.phi, small_model.problem
    eta = rng.uniform(0.0, 1.0, p.histories.dims[2])
    for _ in range(10):
        x = rng.standard_normal(p.dim)
        y = phi.prox(0.0, eta, np.zeros(p.dim), x, 1e-12)
        assert np.allclose(y, p.constraint.project(x), rtol=0.0, atol=1e-10)


def test_contact_table_covers_every_free_contact_node(small_model, tmp_path):
    run = time_march(small_model.problem, evolution(small_model.scenario.grid))
    report = complementarity_report(small_model, run.trajectory)
    schema, rows = read_table(write_contact_rows(tmp_path / "contact.csv", report))
    assert schema == "contact-rows/1"
    spaces = small_model.spaces
    free = set(spaces.gamma3.tolist()) | set(spaces.gamma4.tolist())
    assert {int(r["node"]) for r in rows} == free
    assert len(rows) == (small_model.scenario.grid.N + 1) * len(free)
    clamped = set(spaces.mesh.clamped_nodes.tolist())
    assert not free & clamped
