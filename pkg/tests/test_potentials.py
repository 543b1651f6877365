import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from weakcoupling.potentials import (ZERO, bump_perturbation, check_condition, glued_power_profile,
                                     potential_from_profile, read_potential, smooth_tail_profile,
                                     step_well, tabulated_potential, write_potential)
from weakcoupling.radial import make_grid, radial_p_laplacian


def symbolic_potential(p, N):
    """V = Delta_p phi / phi^(p-1) for phi = (1 + r^2)^(-nu0/2), by sympy."""
    r = sp.symbols("r", positive=True)
    nu = sp.Rational(N) - p
    nu = nu / (p - 1)
    phi = (1 + r**2) ** (-nu / 2)
    d = sp.diff(phi, r)
    flux = r ** (N - 1) * (-d) ** (p - 1)  # d < 0
    lap = -sp.diff(flux, r) / r ** (N - 1)  # Delta_p phi
    return sp.lambdify(r, sp.simplify(lap / phi ** (p - 1)))


def test_smooth_tail_p2_n3_value_at_origin():
    V = potential_from_profile(smooth_tail_profile(2, 3))
    assert V(np.array([0.0]))[0] == pytest.approx(-3.0, abs=1e-8)


@pytest.mark.parametrize("N", [3, 4, 5, 6])
def test_smooth_tail_p2_closed_form(N):
    V = potential_from_profile(smooth_tail_profile(2, N))
    r = np.linspace(0.01, 20, 200)
    np.testing.assert_allclose(V(r), -N * (N - 2) / (1 + r**2) ** 2, rtol=1e-12)


@pytest.mark.parametrize("p,N", [(3, 7), (3, 5), (sp.Rational(5, 2), 4)])
def test_smooth_tail_matches_symbolic(p, N):
    V = potential_from_profile(smooth_tail_profile(float(p), N))
    ref = symbolic_potential(p, N)
    r = np.array([0.2, 1.0, 3.0, 10.0])
    np.testing.assert_allclose(V(r), ref(r), rtol=1e-10)


@pytest.mark.parametrize("p,N", [(2, 3), (2, 5), (3, 7)])
def test_smooth_tail_decay_certificate(p, N):
    V = potential_from_profile(smooth_tail_profile(p, N))
    assert V.decay_certificate is not None
    assert V.check_decay(p, np.geomspace(1e-3, 1e4, 500))


@pytest.mark.parametrize("p,N,R0", [(2, 3, 2.0), (2, 4, 2.0), (2, 5, 3.0), (3, 7, 2.0), (3, 5, 4.0)])
def test_glued_profile_shape(p, N, R0):
    phi = glued_power_profile(p, N, R0)
    r = np.linspace(0, 5 * R0, 4001)
    v = phi(r)
    assert v[0] == 1.0
    assert np.all(np.diff(v) <= 1e-15)
    nu = (N - p) / (p - 1)
    far = r[r >= R0]
    np.testing.assert_allclose(phi(far), (0.75 * R0) ** nu * far ** (-nu), rtol=1e-13)


@pytest.mark.parametrize("p,N,R0", [(2, 3, 2.0), (3, 7, 2.0)])
def test_glued_profile_is_c2(p, N, R0):
    phi = glued_power_profile(p, N, R0)
    for x in (0.5 * R0, R0):
        for f in (phi.profile.value, phi.profile.d1, phi.profile.d2):
            lo, hi = f(np.array([x - 1e-9, x + 1e-9]))
            assert lo == pytest.approx(hi, abs=1e-6)


@pytest.mark.parametrize("p,N,R0", [(2, 3, 2.0), (2, 4, 2.0), (3, 7, 2.0)])
def test_glued_potential_support(p, N, R0):
    V = potential_from_profile(glued_power_profile(p, N, R0))
    assert V.support_radius == R0
    assert V.check_support(10 * R0)
    inner = np.linspace(1e-3, 0.5 * R0 - 1e-9, 100)
    assert np.all(V(inner) == 0.0)


@settings(max_examples=30, deadline=None)
@given(r=st.floats(0.05, 50.0), which=st.sampled_from([(2.0, 3), (2.0, 5), (3.0, 7), (2.5, 4)]))
def test_profile_solves_its_equation(r, which):
    p, N = which
    phi = smooth_tail_profile(p, N)
    V = potential_from_profile(phi)
    x = np.array([r])
    res = radial_p_laplacian(phi.profile, p, N)(x) + V(x) * phi(x) ** (p - 1)
    scale = abs(V(x)[0]) * phi(x)[0] ** (p - 1) + 1e-300
    assert abs(res[0]) <= 1e-10 * scale


def test_profiles_need_subcritical_pair():
    with pytest.raises(ValueError):
        smooth_tail_profile(3, 2)
    with pytest.raises(ValueError):
        glued_power_profile(2, 2, 2.0)
    with pytest.raises(ValueError):
        glued_power_profile(2, 3, 0.5)


def test_bump():
    W = bump_perturbation(1.0, 2.0)
    assert W(np.array([0.0]))[0] == 2.0
    assert np.all(W(np.array([1.0, 1.5, 10.0])) == 0.0)
    assert W.check_support(5.0)
    with pytest.raises(ValueError):
        bump_perturbation(0.0, 1.0)


def test_step_well_is_smoothed_indicator():
    W = step_well(1.0, 1e-3)
    assert W(np.array([0.5]))[0] == pytest.approx(1.0)
    assert W(np.array([1.0]))[0] == pytest.approx(0.5)
    assert W(np.array([1.1]))[0] < 1e-40


@pytest.mark.parametrize("amp,sign", [(1.0, 1), (-1.0, -1)])
def test_condition_sign(amp, sign):
    phi = glued_power_profile(2, 3, 2.0)
    g = make_grid(3, 10.0, 2000)
    omega = check_condition(bump_perturbation(1.0, amp), phi, g)
    assert np.sign(omega) == sign
    # bump integral against phi0 = 1 on the unit ball: 4 pi * 8/105
    assert abs(omega) == pytest.approx(4 * np.pi * 8 / 105, rel=1e-4)


def test_potential_file_roundtrip(tmp_path):
    V = potential_from_profile(smooth_tail_profile(2, 3))
    r = np.linspace(0, 10, 101)
    path = write_potential(tmp_path / "v.txt", V, r, 2.0, 3, comments=["seed=0"])
    rr, vals, p, N = read_potential(path)
    assert (p, N) == (2.0, 3)
    np.testing.assert_array_equal(rr, r)
    np.testing.assert_array_equal(vals, V(r))
    T = tabulated_potential(rr, vals)
    assert T(np.array([20.0]))[0] == 0.0


def test_read_potential_requires_header(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("0 1\n")
    with pytest.raises(ValueError):
        read_potential(path)


def test_zero_potential():
    assert np.all(ZERO(np.linspace(0, 5, 10)) == 0)
    assert ZERO.check_support(100.0)
