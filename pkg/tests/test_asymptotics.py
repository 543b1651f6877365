import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from weakcoupling.asymptotics import (UnsupportedRegime, check_W_scaling, fit_for_regime, fit_linear_limit,
                                      fit_log_corrected, fit_power, fixed_exponent_constant, predict,
                                      richardson_limit)
from weakcoupling.energy import ProblemSpec
from weakcoupling.potentials import ZERO, bump_perturbation

ALPHAS = [2.0**-k for k in range(2, 11)]


def curve(fn, alphas=ALPHAS):
    return [(a, fn(a)) for a in alphas]


@pytest.mark.parametrize("p,N,q", [(2.0, 3, 2.0), (3.0, 7, 1.5), (3.0, 5, 3.0), (3.0, 2, 3.0), (2.5, 1, 2.5 / 1.5)])
def test_predicted_exponents(p, N, q):
    spec = ProblemSpec(p, N)
    assert predict(spec).exponent == pytest.approx(q)


def test_log_regime_prediction():
    pred = predict(ProblemSpec(2.0, 4))
    assert pred.log_corrected and pred.exponent == 1.0 and pred.regime == "N=p^2"


def test_linear_regime_constant_by_independent_quadrature(spec_2_5):
    pred = predict(spec_2_5)
    W = spec_2_5.W
    omega = quad(lambda r: W(np.array([r]))[0] * (1 + r * r) ** -3 * r**4, 0, 1)[0]
    mass = quad(lambda r: (1 + r * r) ** -3 * r**4, 0, np.inf)[0]  # = 3 pi / 16
    assert mass == pytest.approx(3 * math.pi / 16)
    assert pred.constant < 0
    assert pred.constant == pytest.approx(-omega / mass, rel=1e-9)


def test_equal_dimension_is_unsupported():
    with pytest.raises(UnsupportedRegime):
        predict(ProblemSpec(2.0, 2))


def test_fit_power_exact_model():
    fit = fit_power(curve(lambda a: -3 * a**2))
    assert fit.exponent == pytest.approx(2.0, abs=1e-10)
    assert fit.constant == pytest.approx(3.0, abs=1e-10)
    assert fit.r2 == pytest.approx(1.0, abs=1e-10)
    assert fit.spread < 1e-10 and not fit.flags["misfit"] and not fit.flags["regime_violation"]
    assert fit.window == (ALPHAS[-1], ALPHAS[0]) and fit.samples == len(ALPHAS)


def test_fit_power_on_log_model_flags_misfit():
    alphas = np.geomspace(1e-3, 1e-1, 9)
    fit = fit_power(curve(lambda a: -a / abs(math.log(a)), alphas))
    # local slope is 1 + 1/|log alpha| > 1, growing towards large alpha
    assert fit.exponent > 1
    assert fit.r2 < 1
    assert fit.flags["misfit"]


@settings(max_examples=30, deadline=None)
@given(q=st.floats(0.5, 4.0), c=st.floats(1e-3, 1e3), noise=st.integers(0, 2**31))
def test_fit_power_recovers_exponent_under_noise(q, c, noise):
    rng = np.random.default_rng(noise)
    pts = [(a, -c * a**q * math.exp(1e-3 * rng.standard_normal())) for a in ALPHAS]
    fit = fit_power(pts)
    assert fit.exponent == pytest.approx(q, abs=5e-3)
    assert fit.spread < 5e-3


def test_fit_power_preconditions():
    with pytest.raises(ValueError):
        fit_power(curve(lambda a: -a, ALPHAS[:3]))
    with pytest.raises(ValueError):
        fit_power(curve(lambda a: -a, [0.1, 0.08, 0.06, 0.05]))  # under 1.5 decades


def test_fit_power_regime_violation():
    pts = curve(lambda a: -(a**2))
    pts[0] = (pts[0][0], 0.0)
    fit = fit_power(pts)
    assert fit.flags["regime_violation"]
    assert fit.samples == len(ALPHAS) - 1
    assert fit.exponent == pytest.approx(2.0)


def test_log_corrected_exact_model():
    fit = fit_log_corrected(curve(lambda a: -0.7 * a / abs(math.log(a))))
    assert fit.constant == pytest.approx(0.7, abs=1e-10)
    assert fit.flags["ratio_mean"] == pytest.approx(0.7, abs=1e-10)
    assert fit.spread < 1e-10 and fit.r2 == pytest.approx(1.0, abs=1e-10)
    assert fit.flags["log_shift"] == pytest.approx(0.0, abs=1e-8)


def test_log_corrected_with_shift_beats_pure_power():
    pts = curve(lambda a: -0.7 * a / (abs(math.log(a)) + 1.3))
    log_fit = fit_log_corrected(pts)
    assert log_fit.constant == pytest.approx(0.7, rel=1e-9)
    assert log_fit.flags["log_shift"] == pytest.approx(1.3, rel=1e-8)
    assert log_fit.r2 > fit_power(pts).r2


def test_log_corrected_requires_small_alpha():
    with pytest.raises(ValueError):
        fit_log_corrected([(1.5, -1.0), (0.5, -0.1)])


@pytest.mark.parametrize("s", [0.5, 1.0, 2.0])
def test_richardson_removes_power_correction(s):
    alphas = [2.0**-k for k in range(4, 11)]
    vals = [-1.7 + 0.4 * a**s for a in alphas]
    limit, order = richardson_limit(alphas, vals)
    assert limit == pytest.approx(-1.7, rel=1e-10)
    assert order == pytest.approx(s, rel=1e-8)


def test_richardson_falls_back_on_nonmonotone_data():
    limit, order = richardson_limit([0.4, 0.2, 0.1], [1.0, 2.0, 1.5])
    assert limit == 1.5 and math.isnan(order)
    with pytest.raises(ValueError):
        richardson_limit([0.2, 0.1], [1.0, 2.0])


def test_linear_limit_fit():
    fit = fit_linear_limit(curve(lambda a: -0.25 * a - 0.05 * a**1.5))
    assert fit.constant == pytest.approx(-0.25, rel=1e-8)
    assert fit.exponent == pytest.approx(1.0, abs=0.1)


@pytest.mark.parametrize("regime,model", [("p<N<p^2", "pure_power"), ("N<p", "pure_power"),
                                          ("N=p^2", "log_corrected"), ("N>p^2", "linear_limit")])
def test_fit_dispatch(regime, model):
    assert fit_for_regime(curve(lambda a: -a**1.2), regime).model == model


def test_fixed_exponent_constant():
    assert fixed_exponent_constant(curve(lambda a: -5 * a**2), 2.0) == pytest.approx(5.0)
    with pytest.raises(ValueError):
        fixed_exponent_constant([(0.1, 0.0), (0.05, -1.0)], 2.0)


def test_w_scaling_with_synthetic_sweeps():
    spec = ProblemSpec(2.0, 3, ZERO, bump_perturbation(1, 1))

    def run(s, alphas):
        amp = s.W(np.array([0.0]))[0]
        return [(a, -((amp * a) ** 2)) for a in alphas]

    out = check_W_scaling(spec, [0.5, 1, 2, 4], ALPHAS, run_curve=run)
    assert out.slope == pytest.approx(2.0) and out.predicted == 2.0 and out.nested
    with pytest.raises(ValueError):
        check_W_scaling(spec, [0.0, 1.0], ALPHAS, run_curve=run)
    with pytest.raises(ValueError):
        check_W_scaling(spec, [1.0, 2.0], ALPHAS, run_curve=run)


@pytest.mark.slow
def test_w_scaling_superlinear_solver(spec_2_3):
    out = check_W_scaling(spec_2_3, [0.5, 1, 2, 4], [2.0**-k for k in range(4, 9)])
    assert out.slope == pytest.approx(2.0, abs=0.2)
    assert out.nested


@pytest.mark.slow
def test_w_scaling_linear_solver(spec_2_5):
    out = check_W_scaling(spec_2_5, [0.5, 1, 2, 4], [2.0**-k for k in range(4, 9)])
    assert out.slope == pytest.approx(1.0, abs=0.1)
    assert out.nested
