"""Closed-form comparison functions, trial-function upper bounds and capacities.

Supersolutions have the form ``s(r) = r^(-nu) exp(-kappa r)`` with
``kappa = mu * beta``.  Writing ``x = kappa r`` and ``g = 1 + nu / x`` their
radial p-Laplacian factorises as

    -Delta_p s = kappa^p g^(p-2) [A/x + B/x^2 - (p-1)] s^(p-1),

with ``A = (N-1) - 2 nu (p-1)`` and ``B = nu (N - p - nu (p-1))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Optional

import numpy as np
from scipy.linalg import solve_banded
from scipy.optimize import minimize_scalar

from .energy import ProblemSpec, energy
from .radial import RadialFunction, RadialGrid, radial_p_laplacian

EULER_GAMMA = 0.5772156649015329


def constants_A_B(nu: float, p: float, N: int):
    """``(A_nu, B_nu)`` of the factorised p-Laplacian of ``r^(-nu) exp(-kappa r)``."""
    A = (N - 1) - 2.0 * nu * (p - 1)
    B = nu * (N - p - nu * (p - 1))
    return A, B


def decay_rate_from_lambda(lam: float, p: float, factor: float = 1.0) -> float:
    """``(factor * lam / (1 - p))^(1/p)``; needs ``lam < 0``."""
    if not lam < 0:
        raise ValueError(f"rate is real only for lambda < 0, got {lam}")
    if not p > 1:
        raise ValueError("p must exceed 1")
    return (factor * lam / (1.0 - p)) ** (1.0 / p)


@dataclass(frozen=True)
class Supersolution:
    """``r^(-nu) exp(-mu beta r)`` for a given ``(p, N)``."""

    nu: float
    mu: float
    p: float
    N: int
    beta: float = 1.0
    family: str = ""

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError("exponent nu must be positive")
        if not (self.mu > 0 and np.isfinite(self.mu)):
            raise ValueError("rate mu must be real and positive")
        if self.beta < 1:
            raise ValueError("stretch beta must be >= 1")

    @property
    def kappa(self) -> float:
        return self.mu * self.beta

    @property
    def constants(self):
        return constants_A_B(self.nu, self.p, self.N)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return r ** (-self.nu) * np.exp(-self.kappa * r)

    @property
    def profile(self) -> RadialFunction:
        nu, k = self.nu, self.kappa

        def d1(r):
            r = np.asarray(r, dtype=float)
            return -self(r) * (nu / r + k)

        def d2(r):
            r = np.asarray(r, dtype=float)
            return self(r) * ((nu / r + k) ** 2 + nu / r**2)

        return RadialFunction(self.__call__, d1, d2)

    def minus_p_laplacian(self, r) -> np.ndarray:
        """Closed form ``-Delta_p s`` from the factorisation."""
        r = np.asarray(r, dtype=float)
        A, B = self.constants
        x = self.kappa * r
        g = 1.0 + self.nu / x
        return self.kappa**self.p * g ** (self.p - 2) * (A / x + B / x**2 - (self.p - 1)) * self(r) ** (self.p - 1)


def v_alpha(lam: float, p: float, N: int) -> Supersolution:
    """``nu_1 = (N-1)/(p-1)`` with the decay rate of the minimiser."""
    return Supersolution((N - 1) / (p - 1), decay_rate_from_lambda(lam, p), p, N, 1.0, "v_alpha")


def w_alpha(lam: float, p: float, N: int) -> Supersolution:
    """``nu_0 = (N-p)/(p-1)`` with rate ``(2 lam / (1-p))^(1/p)``."""
    return Supersolution((N - p) / (p - 1), decay_rate_from_lambda(lam, p, 2.0), p, N, 1.0, "w_alpha")


def v_alpha_beta(lam: float, p: float, N: int, beta: float) -> Supersolution:
    """``nu_0`` with the minimiser's rate stretched by ``beta``."""
    return Supersolution((N - p) / (p - 1), decay_rate_from_lambda(lam, p), p, N, beta, "v_alpha_beta")


@dataclass(frozen=True)
class ResidualSamples:
    r: np.ndarray
    closed_form: np.ndarray
    direct: np.ndarray
    # summed magnitudes of the terms the direct path adds up
    scale: np.ndarray

    @property
    def discrepancy(self) -> np.ndarray:
        """Difference of the two evaluation paths relative to ``scale``.

        The residual itself can cancel exactly (``1/r`` is harmonic in 3-D), so
        it is no usable reference for a relative comparison.
        """
        diff = np.abs(self.closed_form - self.direct)
        return np.where(self.scale > 0, diff / np.where(self.scale > 0, self.scale, 1.0), 0.0)

    @property
    def max_discrepancy(self) -> float:
        return float(np.max(self.discrepancy))

    @property
    def max_residual(self) -> float:
        return float(np.max(self.closed_form))

    def normalised(self, s: "Supersolution", lam: float) -> np.ndarray:
        """Residual in units of ``|lam| s^(p-1)``."""
        scale = abs(lam) * s(self.r) ** (s.p - 1)
        # samples where s underflows carry no information
        return np.where(scale > 0, self.closed_form / np.where(scale > 0, scale, 1.0), 0.0)


def supersolution_residual(s: Supersolution, lam: float, r) -> ResidualSamples:
    """``-Delta_p s - lam s^(p-1)`` at ``r`` by the factorisation and by direct differentiation."""
    if not lam < 0:
        raise ValueError("lambda must be negative")
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("sample radii must exclude the origin")
    p = s.p
    sp = s(r) ** (p - 1)
    closed = s.minus_p_laplacian(r) - lam * sp
    direct = radial_p_laplacian(s.profile, p, s.N)(r) - lam * sp
    a1 = np.abs(s.profile.d1(r))
    scale = (p - 1) * a1 ** (p - 2) * np.abs(s.profile.d2(r)) + (s.N - 1) / r * a1 ** (p - 1) + abs(lam) * sp
    return ResidualSamples(r, closed, direct, scale)


def residual_threshold(s: Supersolution, lam: float, r, tol: float = 0.0) -> float:
    """Smallest sampled ``x = kappa r`` beyond which every residual is ``<= tol``.

    Returns ``inf`` if the last sample is still positive.
    """
    res = supersolution_residual(s, lam, r)
    bad = np.nonzero(res.closed_form > tol)[0]
    x = s.kappa * res.r
    if bad.size == 0:
        return float(x[0])
    if bad[-1] == x.size - 1:
        return float("inf")
    return float(x[bad[-1] + 1])


def smallest_beta(lam: float, p: float, N: int, R: float, r_max: float = 1e3,
                  samples: int = 2000, max_power: int = 30, rtol: float = 1e-12) -> float:
    """Smallest power of two making ``v_alpha_beta`` a supersolution on ``[R, r_max]``.

    Residuals are compared in units of ``|lam| s^(p-1)`` with slack ``rtol`` for
    rounding (the residual vanishes identically in borderline cases).
    """
    r = np.geomspace(R, r_max, samples)
    for k in range(max_power + 1):
        beta = 2.0**k
        s = v_alpha_beta(lam, p, N, beta)
        if np.max(supersolution_residual(s, lam, r).normalised(s, lam)) <= rtol:
            return beta
    raise ValueError(f"no beta <= 2^{max_power} gives a supersolution on [{R}, {r_max}]")


def dominance_constant(eigenfunction, s: Supersolution, R: float, r_stop: Optional[float] = None):
    """Match ``C s`` to the minimiser at the first node ``>= R`` and test ``phi >= C s`` up to ``r_stop``.

    ``r_stop`` defaults to half the truncation radius, away from the Dirichlet
    boundary layer.  Returns ``(C, min ratio phi / (C s))``.
    """
    grid = eigenfunction.grid
    r = grid.nodes
    stop = 0.5 * grid.R_max if r_stop is None else r_stop
    mask = (r >= R) & (r <= stop)
    if not np.any(mask):
        raise ValueError("empty comparison window")
    j = int(np.argmax(mask))
    C = float(eigenfunction.values[j] / s(r[j]))
    ratio = eigenfunction.values[mask] / (C * s(r[mask]))
    return C, float(np.min(ratio))


# --------------------------------------------------------------------------
# trial-function upper bounds

@dataclass(frozen=True)
class TestFunctionFamily:
    """``f_{alpha,t}(r) = f(s r)`` with ``f = 1`` on ``[0, 1]`` and ``e^(1-r)`` beyond."""

    __test__ = False  # not a pytest class

    t: float
    alpha: float
    p: float
    N: int

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError("t must be positive")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not 1 < self.p < self.N:
            raise ValueError("trial family needs 1 < p < N")

    @property
    def scale(self) -> float:
        return self.t * self.alpha ** ((self.p - 1) / (self.N - self.p))

    @property
    def R_alpha(self) -> float:
        return 1.0 / self.scale

    def __call__(self, r):
        x = self.scale * np.asarray(r, dtype=float)
        return np.where(x <= 1.0, 1.0, np.exp(1.0 - np.maximum(x, 1.0)))


def _trial_grid(N: int, R: float) -> RadialGrid:
    from .eigensolver import default_grid
    return default_grid(N, R)


def trial_field(spec: ProblemSpec, t: Optional[float], extent: float = 40.0):
    """``f_{alpha,t} phi0`` (or ``phi0`` when ``t`` is None) on a grid past ``extent * R_alpha``."""
    if spec.phi0 is None:
        raise ValueError("upper bounds need the ground state phi0")
    if t is None:
        R = max(extent * 50.0, 2000.0)
        grid = _trial_grid(spec.N, R)
        vals = spec.phi0(grid.nodes).copy()
    else:
        fam = TestFunctionFamily(t, spec.alpha, spec.p, spec.N)
        R = max(extent * fam.R_alpha, 50.0)
        grid = _trial_grid(spec.N, R)
        vals = fam(grid.nodes) * spec.phi0(grid.nodes)
    vals[-1] = 0.0
    return grid.field(vals)


def trial_mass(spec: ProblemSpec, t: float) -> float:
    """``int f_{alpha,t}^p phi0^p dx``."""
    u = trial_field(spec, t)
    return float(np.dot(u.grid.weights, np.abs(u.values) ** spec.p))


def upper_bound_lambda(spec: ProblemSpec, t: Optional[float]) -> float:
    """Rayleigh quotient of the trial ``f_{alpha,t} phi0``.

    For ``N > p^2`` pass ``t=None`` to use ``phi0`` itself.  Any admissible trial
    bounds the principal eigenvalue from above.
    """
    if t is not None and not t > 0:
        raise ValueError("t must be positive")
    if not spec.alpha > 0:
        raise ValueError("upper bounds need alpha > 0")
    u = trial_field(spec, t)
    e = energy(spec, u)
    return e.total / e.mass


@dataclass(frozen=True)
class UpperBound:
    t: Optional[float]
    bound: float
    unimodal: bool = True
    bound_at_tmin: Optional[float] = None
    samples: tuple = field(default=(), repr=False)

    def __iter__(self) -> Iterator:
        return iter((self.t, self.bound))


def optimize_upper_bound(spec: ProblemSpec, t_range=(1e-3, 10.0), n_samples: int = 17) -> UpperBound:
    """Minimise ``upper_bound_lambda`` over ``t`` (golden section in ``log t``).

    For ``N > p^2`` the trial is ``phi0`` and no search is needed.  A non-unimodal
    sample pattern keeps the best sampled ``t`` and sets ``unimodal=False``.
    """
    p, N = spec.p, spec.N
    if N > p * p:
        return UpperBound(None, upper_bound_lambda(spec, None))
    lo, hi = math.log(t_range[0]), math.log(t_range[1])
    logs = np.linspace(lo, hi, n_samples)
    vals = np.array([upper_bound_lambda(spec, math.exp(s)) for s in logs])
    k = int(np.argmin(vals))
    # unimodal: nonincreasing up to the minimum, nondecreasing after
    unimodal = bool(np.all(np.diff(vals[: k + 1]) <= 0) and np.all(np.diff(vals[k:]) >= 0))
    at_tmin = float(vals[0]) if np.isclose(N, p * p) else None
    samples = tuple(zip(np.exp(logs).tolist(), vals.tolist()))
    if not unimodal or k in (0, n_samples - 1):
        return UpperBound(float(math.exp(logs[k])), float(vals[k]), unimodal, at_tmin, samples)
    res = minimize_scalar(lambda s: upper_bound_lambda(spec, math.exp(s)), method="golden",
                          bracket=(logs[k - 1], logs[k], logs[k + 1]), options={"xtol": 1e-4})
    if res.fun <= vals[k]:
        return UpperBound(float(math.exp(res.x)), float(res.fun), True, at_tmin, samples)
    return UpperBound(float(math.exp(logs[k])), float(vals[k]), True, at_tmin, samples)


# --------------------------------------------------------------------------
# weighted capacity

@dataclass(frozen=True)
class CapacityProblem:
    """Minimise ``int_1^R |u'|^p rho^(d-1) d rho`` with ``u(1) = 1``, ``u(R) = 0``."""

    p: float
    N: int
    R: float

    def __post_init__(self):
        if not self.R > 1:
            raise ValueError("outer radius must exceed 1")
        if not self.p > 1:
            raise ValueError("p must exceed 1")

    @property
    def d(self) -> float:
        return (self.p**2 - self.N) / (self.p - 1)

    @property
    def nu(self) -> float:
        return (self.N - self.p) / (self.p - 1) ** 2

    def minimiser(self, rho):
        """``u0(rho) = (R^nu - rho^nu) / (R^nu - 1)``."""
        Rn = self.R**self.nu
        return (Rn - np.asarray(rho, dtype=float) ** self.nu) / (Rn - 1.0)

    def cell_weights(self, rho: np.ndarray) -> np.ndarray:
        """Exact ``int rho^(d-1)`` over each cell."""
        d = self.d
        if abs(d) < 1e-14:
            return np.diff(np.log(rho))
        return np.diff(rho**d) / d


def _capacity_newton(cp: CapacityProblem, rho: np.ndarray, tol: float = 1e-13, max_iter: int = 100) -> float:
    p = cp.p
    h = np.diff(rho)
    m = cp.cell_weights(rho)
    u = 1.0 - (rho - 1.0) / (cp.R - 1.0)

    def value(v):
        return float(np.sum(m * np.abs(np.diff(v) / h) ** p))

    E = value(u)
    for _ in range(max_iter):
        s = np.diff(u) / h
        a = np.abs(s)
        flux = m / h * a ** (p - 2) * s
        G = flux[:-1] - flux[1:]  # d E / d u at interior nodes, up to the factor p
        stiff = (p - 1) * m / h**2 * a ** (p - 2)
        n = G.size
        ab = np.zeros((3, n))
        ab[1] = stiff[:-1] + stiff[1:]
        ab[0, 1:] = -stiff[1:-1]
        ab[2, :-1] = -stiff[1:-1]
        du = solve_banded((1, 1), ab, -G)
        step = 1.0
        while True:
            trial = u.copy()
            trial[1:-1] += step * du
            Et = value(trial)
            if Et <= E or step < 1e-12:
                break
            step *= 0.5
        u, Eold, E = trial, E, Et
        if abs(Eold - E) <= tol * abs(E) and np.max(np.abs(step * du)) < 1e-12:
            break
    return E


def capacity_value(cp: CapacityProblem, mode: str = "closed_form", M: int = 4000,
                   ratio: Optional[float] = None) -> float:
    """Weighted capacity of the annulus ``1 < rho < R``.

    ``closed_form`` is ``nu^(p-1) (R^nu - 1)^(1-p)``; ``discrete_min`` minimises over
    continuous piecewise-linear functions on ``M`` cells (geometrically graded
    when ``R`` is large) by Newton iteration on the Euler-Lagrange system.
    """
    if mode == "closed_form":
        nu, p = cp.nu, cp.p
        return nu ** (p - 1) * (cp.R**nu - 1.0) ** (1.0 - p)
    if mode != "discrete_min":
        raise ValueError(f"unknown capacity mode {mode!r}")
    if ratio is None and cp.R <= 20:
        rho = np.linspace(1.0, cp.R, M + 1)
    else:
        rho = np.geomspace(1.0, cp.R, M + 1)
    return _capacity_newton(cp, rho)


def capacity_first_integral(cp: CapacityProblem, rho: np.ndarray) -> float:
    """Discrete minimum from the constant-flux first integral (cross-check)."""
    p = cp.p
    h = np.diff(rho)
    c = cp.cell_weights(rho) / h
    return float(np.sum(h * c ** (-1.0 / (p - 1))) ** (1.0 - p))


# --------------------------------------------------------------------------
# incomplete gamma and mass growth

def _gamma0_series(x: float, tol: float = 1e-17) -> float:
    total = 0.0
    term = 1.0
    for k in range(1, 500):
        term *= x / k
        add = (-1) ** (k + 1) * term / k
        total += add
        if abs(add) < tol * max(abs(total), 1e-300):
            break
    return -EULER_GAMMA - math.log(x) + total


def _gamma0_continued_fraction(x: float, tol: float = 1e-16) -> float:
    # modified Lentz on e^x E1(x) = 1/(x+1- 1/(x+3- 4/(x+5- ...)))
    tiny = 1e-300
    b = x + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 10000):
        an = -float(i * i)
        b += 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < tol:
            break
    return h * math.exp(-x)


def incomplete_gamma_zero(x: float, branch: Optional[str] = None) -> float:
    """``Gamma(0, x) = int_x^inf e^(-s) ds / s``.

    Power series below 1, continued fraction from 1 on; ``branch`` forces one
    of ``"series"`` or ``"fraction"``.
    """
    x = float(x)
    if not x > 0:
        raise ValueError("Gamma(0, x) needs x > 0")
    if branch is None:
        branch = "series" if x < 1.0 else "fraction"
    if branch == "series":
        return _gamma0_series(x)
    if branch == "fraction":
        return _gamma0_continued_fraction(x)
    raise ValueError(f"unknown branch {branch!r}")


class MassGrowth(NamedTuple):
    value: float
    exponent: Optional[float]
    logarithmic: bool


def lower_bound_mass(lam: float, p: float, N: int) -> MassGrowth:
    """Predicted growth of ``||phi_alpha||_p^p`` as ``lam -> 0-`` (unknown constant).

    ``(-lam)^(nu0 - N/p)`` for ``p < N < p^2``; ``|log(-lam)|`` for ``N = p^2``.
    """
    if not lam < 0:
        raise ValueError("lambda must be negative")
    if not p < N <= p * p + 1e-12:
        raise ValueError("mass growth law needs p < N <= p^2")
    if np.isclose(N, p * p):
        return MassGrowth(abs(math.log(-lam)), None, True)
    e = (N - p) / (p - 1) - N / p
    return MassGrowth((-lam) ** e, e, False)
