import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

import weakcoupling.eigensolver as es
from weakcoupling.asymptotics import predict
from weakcoupling.eigensolver import (SolverConfig, SolverFailure, auto_radius, decay_rate, default_grid,
                                      is_concave, lambda_curve, solve_ground_state,
                                      solve_with_domain_extrapolation, tridiagonal_eigenvalue)
from weakcoupling.energy import ProblemSpec, rayleigh
from weakcoupling.potentials import ZERO, bump_perturbation, step_well
from weakcoupling.radial import make_grid

from conftest import critical_spec

CFG = SolverConfig()


def square_well_energy(depth, radius=1.0):
    """Bound state of the 3-D unit well: k cot(k a) = -kappa, k^2 + kappa^2 = depth."""
    if depth <= (math.pi / (2 * radius)) ** 2:
        return 0.0

    def f(kappa):
        k = math.sqrt(depth - kappa * kappa)
        return k * math.cos(k * radius) + kappa * math.sin(k * radius)

    kappa = brentq(f, 1e-12, math.sqrt(depth) - 1e-12, xtol=1e-14)
    return -kappa * kappa


def well_spec(alpha):
    return ProblemSpec(2.0, 3, ZERO, step_well(1.0), alpha)


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(tolerance_lambda=0)
    with pytest.raises(ValueError):
        SolverConfig(backtracking=1.0)
    with pytest.raises(ValueError):
        SolverConfig(step_init=-1)
    with pytest.raises(ValueError):
        SolverConfig(method="newton")
    assert CFG.lambda_tolerance(-0.5) == 1e-8
    assert CFG.lambda_tolerance(-2e-7) == pytest.approx(2e-10)


def test_grid_dimension_must_match(spec_2_3):
    with pytest.raises(ValueError):
        solve_ground_state(spec_2_3, make_grid(4, 10.0, 50))


@pytest.mark.parametrize("alpha", [5.0, 8.0, 20.0])
def test_square_well_matches_transcendental_equation(alpha):
    res = auto_radius(well_spec(alpha), CFG, R_min=30.0)
    exact = square_well_energy(alpha)
    assert res.lam < 0
    assert res.lam == pytest.approx(exact, rel=0.01)


def test_square_well_below_threshold_has_no_bound_state():
    res = auto_radius(well_spec(1.0), CFG, R_min=100.0)
    assert abs(res.lam) < 1e-5
    assert res.flags["truncation_converged"]


@pytest.mark.parametrize("alpha", [0.25, 1.0])
def test_shooting_matches_tridiagonal(spec_2_3, alpha):
    g = default_grid(3, 150.0)
    s = spec_2_3.with_alpha(alpha)
    lam_t, ef_t = tridiagonal_eigenvalue(s, g)
    res = solve_ground_state(s, g)
    # eigh_tridiagonal is accurate to eps * ||A|| with ||A|| ~ 1/h_min^2
    assert res.lam == pytest.approx(lam_t, abs=10 * np.finfo(float).eps / 5e-3**2)
    # its eigenvector's quotient is second-order accurate
    assert res.lam == pytest.approx(rayleigh(s, ef_t), rel=1e-10)
    inner = g.nodes < 30
    assert np.allclose(res.eigenfunction.values[inner], ef_t.values[inner], rtol=1e-5, atol=1e-8)


@settings(max_examples=15, deadline=None)
@given(radius=st.floats(0.3, 3.0), amp=st.floats(0.5, 20.0), N=st.integers(1, 5))
def test_shooting_matches_tridiagonal_random_bumps(radius, amp, N):
    s = ProblemSpec(2.0, N, ZERO, bump_perturbation(radius, amp), 1.0)
    g = make_grid(N, 12.0, 300)
    lam_t, _ = tridiagonal_eigenvalue(s, g)
    lam_s = solve_ground_state(s, g).lam
    assert lam_s == pytest.approx(lam_t, rel=1e-8, abs=1e-12)


def test_tridiagonal_rejects_p_not_two(spec_3_7):
    with pytest.raises(ValueError):
        tridiagonal_eigenvalue(spec_3_7, default_grid(7, 10.0))


@pytest.mark.parametrize("p,N,R,M", [(2.0, 3, 25.0, 400), (3.0, 7, 10.0, 200)])
def test_descent_agrees_with_shooting(p, N, R, M):
    s = critical_spec(p, N).with_alpha(1.0)
    g = make_grid(N, R, M)
    ref = solve_ground_state(s, g)
    res = solve_ground_state(s, g, SolverConfig(method="descent", seed=3))
    assert res.converged
    assert res.lam == pytest.approx(ref.lam, rel=1e-7)
    hist = np.array(res.history)
    assert np.all(np.diff(hist) <= 1e-15 * np.abs(hist[1:]))  # monotone descent
    assert np.all(res.eigenfunction.values[:-1] > 0)
    assert res.eigenfunction.values[0] == 1.0


def test_descent_is_seeded_deterministically(spec_2_3):
    s = spec_2_3.with_alpha(1.0)
    g = make_grid(3, 20.0, 200)
    cfg = SolverConfig(method="descent", seed=11, max_iterations=50)
    a = solve_ground_state(s, g, cfg)
    b = solve_ground_state(s, g, cfg)
    assert a.lam == b.lam and np.array_equal(a.eigenfunction.values, b.eigenfunction.values)


def test_descent_failure_carries_last_iterate(spec_2_3, monkeypatch):
    calls = iter(range(10**6))
    # a quotient that rises on every trial never passes the Armijo test
    monkeypatch.setattr(es, "rayleigh", lambda spec, u: float(next(calls)))
    with pytest.raises(SolverFailure) as info:
        solve_ground_state(spec_2_3.with_alpha(1.0), make_grid(3, 10.0, 50), SolverConfig(method="descent"))
    assert info.value.last_iterate is not None
    assert len(info.value.last_iterate.values) == 51


@pytest.mark.parametrize("p,N,alpha", [(2.0, 3, 0.25), (2.0, 5, 0.1), (3.0, 7, 0.5)])
def test_result_invariants(p, N, alpha):
    s = critical_spec(p, N).with_alpha(alpha)
    res = auto_radius(s, CFG)
    u = res.eigenfunction.values
    assert u[0] == 1.0 and u[-1] == 0.0
    assert np.all(u[:-1] > 0)
    assert res.lam < 0 and res.converged
    assert abs(rayleigh(s, res.eigenfunction) - res.lam) <= CFG.lambda_tolerance(res.lam)
    unit = res.unit_mass(p)
    assert np.dot(unit.grid.weights, unit.values**p) == pytest.approx(1.0, rel=1e-12)
    assert res.residual < 1e-8
    assert set(res.row()) >= {"alpha", "lambda", "residual", "iterations", "R_max", "converged"}


def test_zero_coupling_gives_zero_and_decreases_with_radius(spec_2_3):
    lams = [solve_ground_state(spec_2_3, default_grid(3, R)).lam for R in (50, 100, 500, 1000, 2000)]
    # Dirichlet truncation of a critical problem costs O(R^-2)
    assert all(0 <= l < 3.0 / R**2 for l, R in zip(lams, (50, 100, 500, 1000, 2000)))
    assert all(l < 1e-5 for l in lams[2:])
    assert all(b <= a for a, b in zip(lams, lams[1:]))


def test_dirichlet_eigenvalue_decreases_with_radius(spec_2_3):
    s = spec_2_3.with_alpha(0.5)
    lams = [solve_ground_state(s, default_grid(3, R)).lam for R in (20, 40, 80, 160)]
    assert all(b <= a + 1e-12 for a, b in zip(lams, lams[1:]))


def test_grid_refinement_is_second_order():
    s = ProblemSpec(2.0, 3, ZERO, bump_perturbation(1.0, 1.0), 10.0)
    lams = [solve_ground_state(s, make_grid(3, 15.0, M)).lam for M in (300, 600, 1200)]
    d1, d2 = lams[0] - lams[1], lams[1] - lams[2]
    assert d2 / d1 == pytest.approx(0.25, abs=0.03)


def test_short_schedule_is_flagged(spec_2_3):
    s = spec_2_3.with_alpha(0.25)
    short = solve_with_domain_extrapolation(s, CFG, (100.0, 200.0))
    assert short.flags["schedule_short"]
    mu = decay_rate(auto_radius(s, CFG).lam, 2.0)
    ok = solve_with_domain_extrapolation(s, CFG, (12 / mu, 24 / mu))
    assert ok.flags["truncation_converged"] and not ok.flags["schedule_short"]
    a, b = ok.flags["lambdas"]
    assert abs(a - b) < 0.01 * abs(b)


def test_schedule_needs_two_radii(spec_2_3):
    with pytest.raises(ValueError):
        solve_with_domain_extrapolation(spec_2_3, CFG, (100.0,))


def test_linear_regime_ratio_at_small_coupling(spec_2_5):
    res = auto_radius(spec_2_5.with_alpha(0.01), CFG)
    assert res.lam < 0
    assert res.lam / 0.01 == pytest.approx(predict(spec_2_5).constant, rel=0.1)


@pytest.fixture(scope="module")
def curve_2_3(spec_2_3):
    return lambda_curve(spec_2_3, [2.0**-k for k in range(2, 7)])


def test_curve_is_negative_and_concave(curve_2_3):
    a = [x for x, _ in curve_2_3]
    lam = [r.lam for _, r in curve_2_3]
    assert all(l < 0 for l in lam)
    assert is_concave(a, lam, tol=1e-9)


def test_ratio_lambda_over_alpha_vanishes(curve_2_3):
    ratios = [abs(r.lam / a) for a, r in curve_2_3]
    assert ratios[-1] < ratios[-2] < ratios[-3]


def test_minimiser_converges_locally_to_ground_state(curve_2_3, spec_2_3):
    errs = []
    for _, r in curve_2_3:
        g = r.grid
        near = g.nodes <= 5
        errs.append(np.max(np.abs(r.eigenfunction.values[near] - spec_2_3.phi0(g.nodes[near]))))
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_repulsive_perturbation_leaves_no_bound_state():
    s = critical_spec(2.0, 3, amplitude=-1.0)
    cur = lambda_curve(s, [2.0**-6, 2.0**-8], R_min=2000.0)
    for _, r in cur:
        assert abs(r.lam) < 1e-5


def test_curve_requires_decreasing_alphas(spec_2_3):
    with pytest.raises(ValueError):
        lambda_curve(spec_2_3, [0.1, 0.2])


def test_curve_records_failures_and_continues(spec_2_3, monkeypatch):
    real = es.auto_radius

    def flaky(spec, *args, **kw):
        if spec.alpha == 0.5:
            raise SolverFailure("injected")
        return real(spec, *args, **kw)

    monkeypatch.setattr(es, "auto_radius", flaky)
    seen = []
    cur = lambda_curve(spec_2_3, [1.0, 0.5, 0.25], on_result=lambda a, r: seen.append(a))
    assert seen == [1.0, 0.5, 0.25]
    assert isinstance(cur[1][1], SolverFailure)
    assert cur[2][1].lam < 0


@pytest.mark.parametrize("lams,ok", [([-4, -1, 0], True), ([-1, -1.5, 0], False), ([0, 0, 0], True)])
def test_is_concave(lams, ok):
    assert is_concave([1.0, 2.0, 3.0][::-1], lams[::-1]) == ok
