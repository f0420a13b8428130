import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from src.core.errors import DimensionError, MetricError
from src.core.spaces import (
    ConstraintSet,
    DofVector,
    EnergyMetric,
    TraceOperator,
    apply_trace,
    apply_trace_adjoint,
    power_iteration,
    project_constraint,
    v_norm,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
vec4 = arrays(np.float64, 4, elements=finite)

GRAM = np.array(
    [
        [4.0, 1.0, 0.0, 0.5],
        [1.0, 3.0, 0.2, 0.0],
        [0.0, 0.2, 2.0, 0.1],
        [0.5, 0.0, 0.1, 5.0],
    ]
)


def test_dof_vector_is_read_only():
    v = DofVector([1.0, 2.0])
    with pytest.raises(ValueError):
        v.values[0] = 3.0


def test_dof_vector_rejects_nan():
    with pytest.raises(ValueError):
        DofVector([np.nan])


def test_metric_rejects_indefinite_gram():
    with pytest.raises(MetricError):
        EnergyMetric(np.diag([1.0, -1.0]))


def test_metric_rejects_asymmetric_gram():
    with pytest.raises(MetricError):
        EnergyMetric(np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_norm_dimension_mismatch():
    with pytest.raises(DimensionError):
        v_norm(np.ones(3), EnergyMetric.identity(2))


def test_riesz_inverts_gram(spd_gram, rng):
    m = EnergyMetric(spd_gram)
    r = rng.standard_normal(4)
    assert np.allclose(spd_gram @ m.riesz(r), r)
    assert m.dual_norm(r) == pytest.approx(np.sqrt(r @ np.linalg.solve(spd_gram, r)))


@given(vec4, vec4)
def test_parallelogram_law(u, v):
    m = EnergyMetric(GRAM)
    lhs = m.norm(u + v) ** 2 + m.norm(u - v) ** 2
    rhs = 2.0 * m.norm(u) ** 2 + 2.0 * m.norm(v) ** 2
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-6)


@given(vec4)
def test_projection_idempotent_and_feasible(v):
    k = ConstraintSet.upper_bound(4, [0, 2], [0.5, -1.0], signs=[1.0, -1.0])
    p = k.project(v)
    assert k.contains(p)
    assert np.array_equal(k.project(p), p)
    unconstrained = [1, 3]
    assert np.array_equal(p[unconstrained], v[unconstrained])


@given(vec4, vec4)
def test_projection_nonexpansive(u, v):
    k = ConstraintSet.upper_bound(4, [1, 3], [0.0, 2.0])
    assert np.linalg.norm(k.project(u) - k.project(v)) <= np.linalg.norm(u - v) + 1e-9


def test_projection_clips_exactly():
    k = ConstraintSet.upper_bound(3, [1], 10.0)
    out = project_constraint([1.0, 30.0, -5.0], k)
    assert out.to_list() == [1.0, 10.0, -5.0]


def test_negative_sign_caps_from_below():
    k = ConstraintSet.upper_bound(2, [1], 0.05, signs=[-1.0])
    assert k.project([0.0, -1.0])[1] == -0.05
    assert k.project([0.0, 3.0])[1] == 3.0
    assert np.array_equal(k.active_values(), [-0.05])


def test_whole_space_rejects_indices():
    with pytest.raises(ValueError):
        ConstraintSet(2, indices=[0], bound=[1.0])


@given(vec4, arrays(np.float64, 2, elements=finite))
def test_adjoint_consistency(v, x):
    mop = TraceOperator(np.array([[0.6, 0.8, 0.0, 0.0], [0.0, 0.0, 0.8, -0.6]]), weights=[0.5, 2.0])
    lhs = mop.x_inner(apply_trace(mop, v), x)
    rhs = float(v @ apply_trace_adjoint(mop, x))
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-6)


def test_trace_rejects_nonpositive_weights():
    with pytest.raises(DimensionError):
        TraceOperator(np.eye(2), weights=[1.0, 0.0])


def test_power_iteration_matches_generalized_eigenvalue():
    mat = np.array([[1.0, 0.0, 2.0, 0.0], [0.0, 1.0, 0.0, 1.0]])
    mop = TraceOperator(mat, weights=[1.0, 3.0])
    m = EnergyMetric(GRAM)
    est = power_iteration(mop, m)
    normal = mat.T @ np.diag([1.0, 3.0]) @ mat
    exact = np.sqrt(np.max(np.linalg.eigvals(np.linalg.solve(GRAM, normal)).real))
    assert est.value == pytest.approx(exact, rel=1e-4)
    assert est.bound >= est.value
    assert v_norm(est.direction, m) == pytest.approx(1.0)


def test_power_iteration_of_zero_trace():
    est = power_iteration(TraceOperator(np.zeros((1, 3))), EnergyMetric.identity(3))
    assert est.value == 0.0


@settings(max_examples=25)
@given(st.integers(1, 6))
def test_identity_trace_has_unit_norm(n):
    est = power_iteration(TraceOperator(np.eye(n)), EnergyMetric.identity(n))
    assert est.value == pytest.approx(1.0)
