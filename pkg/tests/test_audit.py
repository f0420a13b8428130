from dataclasses import replace

import numpy as np
import pytest
from scipy import linalg

from src.audit import (
    AuditConfig,
    audit_contact_smallness,
    audit_h0,
    audit_histories,
    audit_j_coupling,
    audit_j_growth,
    audit_load_lipschitz,
    audit_multivalued_monotone,
    audit_operator_A,
    audit_operator_growth,
    audit_potential_phi,
    audit_trace_norm,
    run_audit,
)
from src.contact import assemble_model
from src.core.potentials import ConstantAlpha, PrototypePotential, ZeroPotential, quadratic
from src.core.problem import AbstractProblem, AffineLoad, AffineOperator, HypothesisConstants
from src.core.spaces import ConstraintSet, EnergyMetric, TraceOperator
from src.history.operators import HistoryBundle, ZeroHistory
from src.toys import coupled_4d, scalar_ode

NONE = ZeroHistory(0)

FAST = AuditConfig(samples=120, workers=1)


def concave_j_problem() -> AbstractProblem:
    """A = 1 with j = -2 x^2 on a unit trace, so A + dj is not monotone."""
    k = ConstraintSet.whole_space(1)
    j = PrototypePotential(quadratic(-4.0), ConstantAlpha(1.0), np.ones(1))
    return AbstractProblem(
        name="concave-j",
        metric=EnergyMetric.identity(1),
        trace=TraceOperator(np.eye(1)),
        constraint=k,
        operator=AffineOperator(np.eye(1)),
        load=AffineLoad(np.zeros(1)),
        phi=ZeroPotential(k),
        j=j,
        histories=HistoryBundle(NONE, NONE, NONE, ZeroHistory(1)),
        constants=HypothesisConstants(m_A=1.0, a2=1.0, m_j=j.m_j, M_norm=1.0),
    )


def test_config_validation():
    with pytest.raises(ValueError):
        AuditConfig(samples=0)
    with pytest.raises(ValueError):
        AuditConfig(safety_factor=0.9)
    with pytest.raises(ValueError):
        AuditConfig.from_dict({"samples": 10, "colour": "red"})
    cfg = AuditConfig.from_dict({"radii": [1, 2]})
    assert cfg.radii == (1.0, 2.0)
    assert AuditConfig.from_dict(cfg.to_dict()) == cfg


def test_coupled_toy_passes_every_gate():
    report = run_audit(coupled_4d(), FAST)
    assert report.passed, [e.name for e in report.failures()]
    assert report.entry("smallness condition").passed
    assert report.entry("g relaxed monotonicity").passed
    for entry in report.entries:
        if entry.samples:
            assert entry.statement == f"no violation found in {entry.samples} samples"


def test_overclaimed_monotonicity_is_caught():
    p = coupled_4d()
    s = p.operator.stiffness
    true_m = float(linalg.eigh((s + s.T) / 2, p.metric.gram, eigvals_only=True)[0])
    entry = audit_operator_A(p, FAST, m_A=1.1 * true_m)
    assert not entry.passed
    assert entry.estimate < 0
    assert audit_operator_A(p, FAST, m_A=0.99 * true_m).passed


def test_nonmonotone_subdifferential_is_caught():
    entry = audit_multivalued_monotone(concave_j_problem(), FAST)
    assert not entry.passed
    assert set(entry.witness) >= {"v1", "v2"}
    assert audit_multivalued_monotone(coupled_4d(), FAST).passed


def test_overclaimed_phi_constants_are_caught():
    four, convex = audit_potential_phi(coupled_4d(), FAST, alpha_phi=0.0, beta_phi=0.0)
    assert not four.passed
    assert four.witness is not None
    assert convex.passed


def test_history_audit_flags_small_lipschitz_claims():
    p = scalar_ode()
    honest = audit_histories(p, FAST)
    assert all(e.passed for e in honest)
    understated = replace(p, constants=replace(p.constants, c_R1=0.1))
    entries = audit_histories(understated, FAST)
    assert not entries[0].passed
    assert entries[0].witness is not None
    assert entries[1].note == "identically zero"


def test_audit_is_deterministic_in_the_seed():
    a = run_audit(coupled_4d(), FAST).to_dict()
    b = run_audit(coupled_4d(), FAST).to_dict()
    assert a == b
    c = run_audit(coupled_4d(), AuditConfig(samples=120, workers=1, seed=5)).to_dict()
    assert c["seed"] == 5


def test_threaded_audit_matches_serial():
    serial = run_audit(coupled_4d(), FAST).to_dict()
    threaded = run_audit(coupled_4d(), AuditConfig(samples=120, workers=4)).to_dict()
    assert serial == threaded


def test_contact_audit_passes(small_model):
    report = run_audit(small_model.problem, FAST, model=small_model)
    assert report.passed, [e.name for e in report.failures()]
    names = [e.name for e in report.entries]
    assert "contact smallness" in names
    assert "law: k lipschitz" in names
    assert report.contact_margin == pytest.approx(small_model.smallness.margin)


def test_contact_smallness_gate_fails_with_heavy_friction(small_model):
    scn = small_model.scenario
    mu = 2.0 * scn.material.m_viscosity / (scn.laws.compliance_max * small_model.gamma_norm**2)
    heavy = assemble_model(scn.with_laws(friction_coefficient=mu))
    entry = audit_contact_smallness(heavy)
    assert not entry.passed
    report = run_audit(heavy.problem, FAST, model=heavy)
    assert not report.passed
    assert not report.entry("smallness condition").passed


def test_safety_factor_is_applied(small_model):
    small = small_model.smallness
    # a factor just above rhs/lhs turns a passing margin into a failure
    factor = 1.01 * small.rhs / small.lhs
    assert audit_contact_smallness(small_model).passed
    assert not audit_contact_smallness(small_model, safety_factor=factor).passed


# -- growth and Lipschitz constants ------------------------------------------


def test_declared_growth_constants_hold():
    p = coupled_4d()
    entries = [
        audit_operator_growth(p, FAST),
        audit_load_lipschitz(p, FAST),
        audit_trace_norm(p, FAST),
        audit_j_growth(p, FAST),
        audit_j_coupling(p, FAST),
    ]
    assert all(e.passed for e in entries), [e.name for e in entries if not e.passed]
    assert all(e.samples == FAST.samples for e in entries)


def test_understated_operator_growth_is_caught():
    p = coupled_4d()
    for kwargs in ({"a2": 3.0}, {"a1": 0.5}, {"a0_max": 0.5, "a1": 0.0, "a2": 0.0}):
        entry = audit_operator_growth(p, FAST, **kwargs)
        assert not entry.passed, kwargs
        assert set(entry.witness) >= {"t", "lam", "v"}


def test_understated_load_lipschitz_is_caught():
    p = coupled_4d()
    entry = audit_load_lipschitz(p, FAST, L_f=0.5 * p.constants.L_f)
    assert not entry.passed
    assert set(entry.witness) >= {"xi1", "xi2"}
    assert audit_load_lipschitz(scalar_ode(), FAST).note == "load carries no history state"


def test_understated_trace_norm_is_caught(small_model):
    p = coupled_4d()
    entry = audit_trace_norm(p, FAST, M_norm=0.9)
    assert not entry.passed
    assert entry.estimate == pytest.approx(1.0, rel=1e-6)
    assert audit_trace_norm(small_model.problem, FAST).passed


def test_understated_j_growth_is_caught():
    p = coupled_4d()
    entry = audit_j_growth(p, FAST, c0j_max=0.5 * p.constants.c0j_max)
    assert not entry.passed
    assert set(entry.witness) >= {"zeta", "x"}
    # -4x grows linearly: only c2j can carry it
    concave = concave_j_problem()
    assert not audit_j_growth(concave, FAST).passed
    assert audit_j_growth(concave, FAST, c2j=4.0).passed


def test_understated_j_coupling_is_caught():
    p = coupled_4d()
    for kwargs in ({"m_j": 0.0}, {"m_1": 0.0}):
        entry = audit_j_coupling(p, FAST, **kwargs)
        assert not entry.passed, kwargs
        assert set(entry.witness) >= {"zeta1", "zeta2", "x1", "x2"}


def test_full_audit_lists_every_constant(small_model):
    names = {e.name for e in run_audit(coupled_4d(), FAST).entries}
    assert names >= {
        "A strong monotonicity",
        "A growth bound",
        "f lipschitz",
        "M operator norm",
        "j subgradient growth",
        "j relaxed monotonicity",
        "phi four-point inequality",
        "history R1 lipschitz",
    }
    report = run_audit(small_model.problem, FAST, model=small_model)
    for name in ("A growth bound", "M operator norm", "j subgradient growth", "j relaxed monotonicity"):
        assert report.entry(name).passed, name


# -- adversarial contact data ------------------------------------------------


def test_inflated_damper_breaks_monotonicity(small_model):
    stiff = assemble_model(small_model.scenario.with_laws(damper_max=20.0))
    entry = audit_multivalued_monotone(stiff.problem, FAST)
    assert not entry.passed
    assert set(entry.witness) >= {"v1", "v2", "zeta"}
    assert not run_audit(stiff.problem, FAST, model=stiff).passed


def test_contact_phi_needs_its_solution_coupling(small_model):
    four, convex = audit_potential_phi(small_model.problem, FAST, alpha_phi=0.0)
    assert not four.passed
    assert set(four.witness) >= {"w1", "w2"}
    assert convex.passed


def test_hundredfold_friction_fails_both_smallness_gates(small_model):
    laws = small_model.scenario.laws
    heavy = assemble_model(small_model.scenario.with_laws(friction_coefficient=100.0 * laws.friction_coefficient))
    assert not audit_contact_smallness(heavy).passed
    assert not audit_h0(heavy.problem).passed
    assert heavy.smallness.margin < 0 < small_model.smallness.margin
