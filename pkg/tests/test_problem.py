import numpy as np
import pytest

from src.core.errors import DimensionError
from src.core.potentials import ConstantAlpha, PrototypePotential, ZeroLipschitzPotential, ZeroPotential, damped_response
from src.core.problem import (
    AbstractProblem,
    AffineLoad,
    AffineOperator,
    HypothesisConstants,
    check_relaxed_monotonicity,
    smallness_margin,
)
from src.core.spaces import ConstraintSet, EnergyMetric, TraceOperator
from src.toys import _no_histories


def test_smallness_margin_formula():
    h = HypothesisConstants(m_A=3.0, m_j=0.5, M_norm=2.0, alpha_phi=0.25)
    assert smallness_margin(h) == pytest.approx(3.0 - 0.5 * 4.0 - 0.25)
    assert h.margin == smallness_margin(h)


def test_constants_reject_negative_and_nonpositive_m_A():
    with pytest.raises(ValueError):
        HypothesisConstants(m_A=0.0)
    with pytest.raises(ValueError):
        HypothesisConstants(m_A=1.0, m_j=-0.1)


def test_constants_dict_roundtrip_rejects_unknown():
    h = HypothesisConstants(m_A=2.0, c_R1=0.3)
    assert HypothesisConstants.from_dict(h.to_dict()) == h
    with pytest.raises(ValueError, match="bogus"):
        HypothesisConstants.from_dict({"m_A": 1.0, "bogus": 2.0})


def test_affine_operator_with_history_coupling():
    a = AffineOperator(np.diag([2.0, 3.0]), coupling=np.array([[1.0], [0.0]]))
    assert a.eval(0.0, np.array([4.0]), np.array([1.0, 1.0])).tolist() == [6.0, 3.0]
    assert np.array_equal(a.stiffness, np.diag([2.0, 3.0]))


def test_affine_operator_rejects_non_square():
    with pytest.raises(DimensionError):
        AffineOperator(np.ones((2, 3)))


def test_affine_load_callable_base_and_coupling():
    f = AffineLoad(lambda t: np.array([1.0 + t, 0.0]), coupling=np.array([[0.0], [2.0]]))
    assert f(0.5, np.array([1.5])).tolist() == [1.5, 3.0]


def _problem(constraint, phi_constraint=None, trace_dim=2):
    return AbstractProblem(
        name="p",
        metric=EnergyMetric.identity(2),
        trace=TraceOperator(np.zeros((0, trace_dim))),
        constraint=constraint,
        operator=AffineOperator(np.eye(2)),
        load=AffineLoad(np.zeros(2)),
        phi=ZeroPotential(phi_constraint or constraint),
        j=ZeroLipschitzPotential(0),
        histories=_no_histories(),
        constants=HypothesisConstants(m_A=1.0),
    )


def test_problem_requires_shared_constraint():
    k = ConstraintSet.whole_space(2)
    assert _problem(k).dim == 2
    with pytest.raises(ValueError):
        _problem(k, ConstraintSet.whole_space(2))


def test_problem_dimension_mismatch():
    with pytest.raises(DimensionError):
        _problem(ConstraintSet.whole_space(2), trace_dim=3)


def test_relaxed_monotonicity_scan():
    g = damped_response()
    assert check_relaxed_monotonicity(g).passed
    report = check_relaxed_monotonicity(g, m_g=0.5)
    assert not report.passed
    lo, hi = sorted(report.witness)
    assert 0.95 <= lo and hi <= 2.05
    assert report.sample_count == 121


def test_relaxed_monotonicity_of_prototype_uses_its_profile():
    j = PrototypePotential(damped_response(), ConstantAlpha(1.0), np.ones(1))
    assert check_relaxed_monotonicity(j).m_g == 1.0
