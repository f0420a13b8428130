import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from src.core.potentials import (
    AbsolutePotential,
    ConstantAlpha,
    PiecewiseLinearSlope,
    PrototypePotential,
    SaturatingAlpha,
    WeightedAbsPotential,
    ZeroPotential,
    damped_response,
    quadratic,
)
from src.core.spaces import ConstraintSet

r_values = st.floats(-50, 50, allow_nan=False)
vec3 = arrays(np.float64, 3, elements=st.floats(-20, 20, allow_nan=False))


def test_damped_response_slopes():
    g = damped_response()
    assert g.derivative(np.array([-1.0, 0.5, 1.5, 5.0])).tolist() == [0.0, 1.0, 1.5, 1.0]
    assert g.m_g == 1.0
    assert g.c1 == 0.0
    assert g.c0 == 2.0


def test_damped_response_value_is_antiderivative():
    g = damped_response()
    r = np.linspace(-1.0, 4.0, 2001)
    numeric = np.concatenate([[0.0], np.cumsum(np.diff(r) * (g.derivative(r[1:]) + g.derivative(r[:-1])) / 2)])
    numeric -= np.interp(0.0, r, numeric)
    assert np.allclose(g.value(r), numeric, atol=1e-5)
    assert g.value(np.zeros(1))[0] == 0.0


def test_quadratic_prototype():
    g = quadratic(3.0)
    assert g.value(np.array([2.0]))[0] == pytest.approx(6.0)
    assert g.m_g == 0.0
    assert g.c1 == 3.0


def test_knots_must_increase():
    with pytest.raises(ValueError):
        PiecewiseLinearSlope([1.0, 0.0], [0.0, 1.0])


@given(r_values, r_values, st.floats(0, 10))
def test_clarke_derivative_positively_homogeneous(r, d, lam):
    g = AbsolutePotential(2.0)
    lhs = g.clarke_dd(np.array([r]), np.array([lam * d]))[0]
    rhs = lam * g.clarke_dd(np.array([r]), np.array([d]))[0]
    assert lhs == pytest.approx(rhs, abs=1e-9)


@given(r_values, r_values, r_values)
def test_clarke_derivative_subadditive(r, d1, d2):
    for g in (AbsolutePotential(1.5), damped_response()):
        x = np.array([r])
        lhs = g.clarke_dd(x, np.array([d1 + d2]))[0]
        rhs = g.clarke_dd(x, np.array([d1]))[0] + g.clarke_dd(x, np.array([d2]))[0]
        assert lhs <= rhs + 1e-9


def test_absolute_value_kink():
    g = AbsolutePotential(1.0)
    assert g.derivative(np.zeros(1))[0] == 1.0
    assert g.clarke_dd(np.zeros(1), np.array([-2.0]))[0] == 2.0


@given(r_values, r_values)
def test_relaxed_monotonicity_of_damped_response(r1, r2):
    g = damped_response()
    lhs = (g.derivative(r1) - g.derivative(r2)) * (r1 - r2)
    assert lhs >= -g.m_g * (r1 - r2) ** 2 - 1e-9 * (1.0 + (r1 - r2) ** 2)


def test_saturating_alpha_bounds():
    a = SaturatingAlpha(0.5)
    z = np.linspace(-30, 30, 101)
    vals = a(0.0, z)
    assert np.all(vals >= 0.0) and np.all(vals <= a.upper)
    assert np.max(np.abs(np.diff(vals) / np.diff(z))) <= a.lipschitz + 1e-12


def test_prototype_constants():
    j = PrototypePotential(damped_response(), SaturatingAlpha(0.5), np.array([1.0, 3.0]))
    assert j.m_j == pytest.approx(0.5)
    assert j.c0j == pytest.approx(0.5 * 2.0 * 2.0)
    assert j.m_1 == pytest.approx(0.25 * 2.0)
    with pytest.raises(ValueError):
        PrototypePotential(quadratic(1.0), SaturatingAlpha(1.0), np.ones(1)).m_1


def test_prototype_directional_derivative_matches_selection_off_kinks():
    j = PrototypePotential(damped_response(), ConstantAlpha(2.0), np.array([1.0, 0.5]))
    x, d = np.array([0.3, 1.7]), np.array([1.0, -2.0])
    expected = float(np.sum(j.weights * j.subgrad_select(0.0, np.zeros(2), x) * d))
    assert j.dir_deriv(0.0, np.zeros(2), x, d) == pytest.approx(expected)


def test_prototype_rejects_nonpositive_weights():
    with pytest.raises(ValueError):
        PrototypePotential(damped_response(), ConstantAlpha(), np.array([1.0, 0.0]))


def _prox_objective(phi, x, y, rho):
    return 0.5 * np.sum((y - x) ** 2) + rho * phi.value(0.0, np.zeros(3), np.zeros(3), y)


@given(vec3, st.floats(0.01, 5.0))
def test_weighted_abs_prox_is_minimizer(x, rho):
    k = ConstraintSet.upper_bound(3, [0], 0.5)
    phi = WeightedAbsPotential(k, np.array([1.0, 0.5, 0.2]))
    y = phi.prox(0.0, np.zeros(3), np.zeros(3), x, rho)
    assert k.contains(y)
    best = _prox_objective(phi, x, y, rho)
    rng = np.random.default_rng(0)
    for _ in range(20):
        z = k.project(y + 0.1 * rng.standard_normal(3))
        assert best <= _prox_objective(phi, x, z, rho) + 1e-9 * (1.0 + abs(best))


@given(vec3, vec3, st.floats(0.01, 5.0))
def test_prox_firmly_nonexpansive(x1, x2, rho):
    k = ConstraintSet.upper_bound(3, [1, 2], [0.0, 1.0])
    phi = WeightedAbsPotential(k, np.array([0.3, 0.3, 0.3]), c_eta=0.1, c_w=0.1)
    eta = w = np.array([0.2, -0.4, 1.0])
    p1 = phi.prox(0.0, eta, w, x1, rho)
    p2 = phi.prox(0.0, eta, w, x2, rho)
    assert np.sum((p1 - p2) ** 2) <= float((p1 - p2) @ (x1 - x2)) + 1e-9 * (1.0 + np.sum((x1 - x2) ** 2))


def test_weighted_abs_rejects_negative_coefficients():
    with pytest.raises(ValueError):
        WeightedAbsPotential(ConstraintSet.whole_space(2), np.array([0.1, 0.1]), c_eta=0.2)


def test_zero_potential_prox_is_projection():
    k = ConstraintSet.upper_bound(2, [0], 1.0)
    phi = ZeroPotential(k)
    assert phi.prox(0.0, None, None, np.array([4.0, 4.0]), 1.0).tolist() == [1.0, 4.0]
    assert phi.active_dofs.tolist() == [0]


@given(vec3)
def test_prox_with_vanishing_step_is_projection(x):
    k = ConstraintSet.upper_bound(3, [0, 2], [0.5, 1.0])
    weighted = WeightedAbsPotential(k, np.array([1.0, 2.0, 0.5]), c_eta=0.2, c_w=0.3)
    zero = ZeroPotential(k)
    eta, w = np.full(3, 0.7), np.full(3, -1.2)
    projected = k.project(x)
    assert np.allclose(weighted.prox(0.0, eta, w, x, 1e-12), projected, rtol=0.0, atol=1e-10)
    assert np.allclose(zero.prox(0.0, eta, w, x, 1e-12), projected, rtol=0.0, atol=0.0)
