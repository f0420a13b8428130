from itertools import combinations

import numpy as np
import pytest

from src.core.errors import InfeasibleProbeError, SmallnessViolation, StepSizeError
from src.core.potentials import (
    ConstantAlpha,
    PrototypePotential,
    WeightedAbsPotential,
    ZeroLipschitzPotential,
    ZeroPotential,
    damped_response,
)
from src.core.problem import AbstractProblem, AffineLoad, AffineOperator, HypothesisConstants
from src.core.spaces import ConstraintSet, EnergyMetric, TraceOperator
from src.solvers.elliptic import (
    FrozenData,
    SolveConfig,
    apriori_bound_check,
    default_step,
    fixed_point_residual,
    generate_probes,
    minty_residual,
    solve_frozen,
)
from src.toys import _no_histories, coupled_4d, scalar_basic, scalar_constrained, scalar_soft

ORACLE_TOL = 1e-6


def make_problem(stiffness, load, caps=None, phi=None, j=None, trace=None, metric=None, **constants):
    stiffness = np.atleast_2d(np.asarray(stiffness, dtype=float))
    n = stiffness.shape[0]
    if caps:
        k = ConstraintSet.upper_bound(n, list(caps), list(caps.values()))
    else:
        k = ConstraintSet.whole_space(n)
    phi = phi(k) if phi is not None else ZeroPotential(k)
    trace = trace if trace is not None else TraceOperator(np.zeros((0, n)))
    j = j if j is not None else ZeroLipschitzPotential(trace.boundary_dim)
    m_a = float(np.min(np.linalg.eigvalsh((stiffness + stiffness.T) / 2)))
    return AbstractProblem(
        name="oracle",
        metric=metric or EnergyMetric.identity(n),
        trace=trace,
        constraint=k,
        operator=AffineOperator(stiffness),
        load=AffineLoad(np.atleast_1d(np.asarray(load, dtype=float))),
        phi=phi,
        j=j,
        histories=_no_histories(),
        constants=HypothesisConstants(m_A=m_a, a2=float(np.max(np.abs(stiffness))), **constants),
    )


def active_set_oracle(stiffness, load, caps):
    """Exact minimizer of 1/2 w'Sw - f'w over {w_i <= g_i} by active-set enumeration."""
    n = len(load)
    idx = list(caps)
    for r in range(len(idx) + 1):
        for active in combinations(idx, r):
            w = np.zeros(n)
            free = [i for i in range(n) if i not in active]
            w[list(active)] = [caps[i] for i in active]
            if free:
                rhs = load[free] - stiffness[np.ix_(free, list(active))] @ w[list(active)]
                w[free] = np.linalg.solve(stiffness[np.ix_(free, free)], rhs)
            multipliers = (load - stiffness @ w)[list(active)]
            feasible = all(w[i] <= caps[i] + 1e-12 for i in idx)
            if feasible and np.all(multipliers >= -1e-12):
                return w
    raise AssertionError("no KKT point found")


def _solve(p, **cfg):
    return solve_frozen(p, FrozenData.zeros(p), SolveConfig(**cfg)).w.values


def _spd(seed, n=4):
    a = np.random.default_rng(seed).standard_normal((n, n))
    return a @ a.T + n * np.eye(n)


# ---------------------------------------------------------------------------
# Closed-form and enumeration oracles
# ---------------------------------------------------------------------------


def test_scalar_basic():
    assert _solve(scalar_basic())[0] == pytest.approx(0.5, abs=ORACLE_TOL)


def test_scalar_constrained_hits_cap_exactly():
    assert _solve(scalar_constrained())[0] == 10.0


@pytest.mark.parametrize("load, expected", [(2.0, 1.0), (0.5, 0.0), (-3.0, -2.0)])
def test_scalar_soft_threshold(load, expected):
    assert _solve(scalar_soft(load))[0] == pytest.approx(expected, abs=ORACLE_TOL)


def test_diagonal_with_cap():
    p = make_problem(np.diag([2.0, 4.0]), [6.0, 4.0], caps={0: 1.0})
    assert _solve(p) == pytest.approx([1.0, 1.0], abs=ORACLE_TOL)


def test_unconstrained_spd_matches_linear_solve():
    s = _spd(11, 3)
    f = np.array([1.0, -2.0, 0.5])
    p = make_problem(s, f, metric=EnergyMetric(_spd(12, 3)))
    assert _solve(p) == pytest.approx(np.linalg.solve(s, f), abs=ORACLE_TOL)


@pytest.mark.parametrize("seed", [21, 22, 23])
def test_capped_spd_matches_active_set_oracle(seed):
    s = _spd(seed)
    f = 4.0 * np.random.default_rng(seed + 100).standard_normal(4)
    caps = {0: 0.1, 2: -0.2}
    p = make_problem(s, f, caps=caps)
    assert _solve(p) == pytest.approx(active_set_oracle(s, f, caps), abs=ORACLE_TOL)


@pytest.mark.parametrize("w_star", [0.5, 1.5])
def test_nonconvex_j_scalar(w_star):
    g = damped_response()
    a, c = 3.0, 0.5
    f = a * w_star + c * float(g.derivative(np.array([w_star]))[0])
    j = PrototypePotential(g, ConstantAlpha(c), np.ones(1))
    p = make_problem([[a]], [f], j=j, trace=TraceOperator(np.eye(1)), m_j=j.m_j, M_norm=1.0)
    assert _solve(p)[0] == pytest.approx(w_star, abs=ORACLE_TOL)


def test_solution_dependent_phi():
    a, b, c_w, w_star = 2.0, 0.5, 0.2, 1.0
    f = a * w_star + b + c_w * np.tanh(w_star)
    p = make_problem(
        [[a]],
        [f],
        phi=lambda k: WeightedAbsPotential(k, np.array([b]), c_w=c_w),
        alpha_phi=c_w,
    )
    assert _solve(p)[0] == pytest.approx(w_star, abs=ORACLE_TOL)


# ---------------------------------------------------------------------------
# Certificates and error contracts
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("factory", [scalar_basic, scalar_constrained, scalar_soft, coupled_4d])
def test_minty_certificate_of_converged_solutions(factory):
    p = factory()
    cfg = SolveConfig()
    d = FrozenData.zeros(p)
    sol = solve_frozen(p, d, cfg)
    report = minty_residual(p, d, sol.w, generate_probes(p, sol.w, 200, seed=0))
    assert report.probe_count == 200
    assert report.passed(100 * cfg.inner_tol)
    assert fixed_point_residual(p, d, sol.w, default_step(p)) <= cfg.inner_tol


def test_minty_rejects_perturbed_non_solution():
    p = scalar_basic()
    d = FrozenData.zeros(p)
    w = np.array([0.8])
    report = minty_residual(p, d, w, generate_probes(p, w, 200, seed=0))
    assert not report.passed(1e-3)


def test_minty_refuses_infeasible_probe():
    p = scalar_constrained()
    d = FrozenData.zeros(p)
    with pytest.raises(InfeasibleProbeError):
        minty_residual(p, d, np.array([10.0]), [np.array([11.0])])


def test_minty_threads_match_serial():
    p = coupled_4d()
    d = FrozenData.zeros(p)
    w = solve_frozen(p, d).w
    probes = generate_probes(p, w, 50, seed=3)
    assert minty_residual(p, d, w, probes, workers=4).min_value == minty_residual(p, d, w, probes).min_value


def test_refuses_when_smallness_fails():
    j = PrototypePotential(damped_response(), ConstantAlpha(4.0), np.ones(1))
    p = make_problem([[3.0]], [1.0], j=j, trace=TraceOperator(np.eye(1)), m_j=j.m_j, M_norm=1.0)
    with pytest.raises(SmallnessViolation) as info:
        _solve(p)
    assert info.value.margin == pytest.approx(-1.0)


def test_fixed_step_too_large_raises_step_size_error():
    with pytest.raises(StepSizeError):
        _solve(scalar_basic(), step=5.0, accelerate=False)


def test_automatic_step_is_inverse_top_eigenvalue():
    s = _spd(5)
    p = make_problem(s, np.ones(4), caps={0: 1.0, 1: 1.0, 2: 1.0, 3: 1.0})
    assert default_step(p) == pytest.approx(1.0 / np.max(np.linalg.eigvalsh(s)))


def test_frozen_data_dimension_check():
    p = coupled_4d()
    with pytest.raises(Exception):
        solve_frozen(p, FrozenData(0.0, np.zeros(1), np.zeros(4), np.zeros(4), np.zeros(2)))


def test_apriori_bound_holds_on_coupled_instance():
    p = coupled_4d()
    d = FrozenData.zeros(p)
    w = solve_frozen(p, d).w
    zero = np.zeros(p.dim)
    report = apriori_bound_check(p, d, w, zero, zero, np.zeros(p.histories.dims[1]))
    assert report.passed
    assert report.lhs > 0
