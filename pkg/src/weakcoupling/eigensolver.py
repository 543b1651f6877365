"""Principal eigenvalue of the discrete radial problem on a truncated ball.

The discrete functional (see :mod:`weakcoupling.energy`) has Euler-Lagrange
equations forming a three-point recurrence

    F_i = F_{i-1} + w_i (V_i - alpha W_i - lam) |u_i|^{p-2} u_i,
    F_i = k_i |d_i|^{p-2} d_i,   d_i = (u_{i+1} - u_i) / h_i,   F_{-1} = 0,

with ``k_i`` the shell volume over the cell width.  Shooting from ``u_0 = 1``
and bisecting on the first sign change (discrete Sturm comparison for
half-linear recurrences) gives the minimiser with Dirichlet data at ``R_max``.
Projected gradient descent on the Rayleigh quotient is available as an
independent route, and for p = 2 the problem is a symmetric tridiagonal
eigenproblem.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal, solve_banded

from .energy import ProblemSpec, energy, rayleigh
from .radial import RadialField, RadialGrid, geometric_grid

log = logging.getLogger(__name__)


class SolverFailure(RuntimeError):
    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = 20000
    step_init: float = 1.0
    tolerance_residual: float = 1e-6
    tolerance_lambda: float = 1e-8
    seed: int = 0
    backtracking: float = 0.5
    method: str = "shooting"

    def __post_init__(self):
        if not (self.tolerance_residual > 0 and self.tolerance_lambda > 0):
            raise ValueError("tolerances must be positive")
        if not 0 < self.backtracking < 1:
            raise ValueError("backtracking factor must lie in (0, 1)")
        if self.step_init <= 0:
            raise ValueError("step_init must be positive")
        if self.method not in ("shooting", "descent", "tridiagonal"):
            raise ValueError(f"unknown method {self.method!r}")

    def lambda_tolerance(self, lam: float) -> float:
        """Absolute tolerance for ``lam``: fixed above 1e-5, relative 1e-3 below."""
        if abs(lam) >= 1e-5:
            return self.tolerance_lambda
        return max(1e-3 * abs(lam), 1e-300)


@dataclass
class SpectralResult:
    lam: float
    eigenfunction: RadialField
    residual: float
    R_max: float
    iterations: int
    converged: bool
    alpha: float = 0.0
    flags: dict = field(default_factory=dict)
    history: List[float] = field(default_factory=list, repr=False)
    breakdown: Optional[object] = field(default=None, repr=False)

    @property
    def grid(self) -> RadialGrid:
        return self.eigenfunction.grid

    @property
    def mass(self) -> float:
        """``||phi||_p^p`` of the eigenfunction normalised by ``phi(0) = 1``."""
        return self.breakdown.mass

    def unit_mass(self, p: float) -> RadialField:
        return self.eigenfunction * (self.mass ** (-1.0 / p))

    def row(self) -> dict:
        b = self.breakdown
        return {"alpha": self.alpha, "lambda": self.lam, "residual": self.residual,
                "iterations": self.iterations, "R_max": self.R_max, "converged": self.converged,
                "mass": b.mass, "kinetic": b.kinetic, "potential_V": b.potential_V,
                "potential_W": b.potential_W}


class _Discrete:
    """Precomputed coefficients of the recurrence for one (spec, grid)."""

    def __init__(self, spec: ProblemSpec, grid: RadialGrid):
        if grid.N != spec.N:
            raise ValueError("grid dimension does not match problem")
        self.p = float(spec.p)
        self.h = grid.spacing
        self.k = grid.cell_measure / self.h
        self.w = grid.weights
        self.q = grid.weights * spec.grid_effective_potential(grid)
        self.M = self.h.size
        self._h = self.h.tolist()
        self._k = self.k.tolist()
        self._w = self.w.tolist()
        self._q = self.q.tolist()

    def shoot(self, lam: float, out: Optional[np.ndarray] = None):
        """Return ``(first nonpositive node or -1, u)`` for the trial eigenvalue."""
        p = self.p
        e1 = p - 1.0
        inv = 1.0 / e1
        h, k, w, q = self._h, self._k, self._w, self._q
        u = out if out is not None else np.empty(self.M + 1)
        ui = 1.0
        u[0] = 1.0
        F = 0.0
        if p == 2.0:
            for i in range(self.M):
                F += (q[i] - lam * w[i]) * ui
                ui = ui + h[i] * (F / k[i])
                u[i + 1] = ui
                if ui <= 0.0:
                    return i + 1, u
                if ui > 1e150:
                    u[: i + 2] *= 1e-150
                    F *= 1e-150
                    ui *= 1e-150
            return -1, u
        for i in range(self.M):
            F += (q[i] - lam * w[i]) * ui**e1
            y = F / k[i]
            d = y**inv if y >= 0.0 else -((-y) ** inv)
            ui = ui + h[i] * d
            u[i + 1] = ui
            if ui <= 0.0:
                return i + 1, u
            if ui > 1e150:
                u[: i + 2] *= 1e-150
                F *= 1e-150**e1
                ui *= 1e-150
        return -1, u

    def match_index(self, u_lo: np.ndarray, u_hi: np.ndarray, rtol: float = 1e-8) -> int:
        """Last node before the bracketing shots separate by ``rtol`` relative.

        Up to there the forward shot is accurate; beyond it the growing mode
        takes over and the tail comes from :meth:`shoot_back`.
        """
        with np.errstate(invalid="ignore"):
            bad = ~(np.abs(u_lo - u_hi) <= rtol * np.abs(u_lo))
        bad[-1] = True
        return max(int(np.argmax(bad)) - 1, 1)

    def shoot_back(self, lam: float, m: int) -> np.ndarray:
        """Decaying solution on nodes ``m..M`` with ``u_M = 0``, scaled to ``u_m = 1``.

        The recurrence run inward from the Dirichlet end is stable for the
        decaying branch.
        """
        p = self.p
        e1 = p - 1.0
        inv = 1.0 / e1
        h, k, w, q = self._h, self._k, self._w, self._q
        M = self.M
        v = np.empty(M + 1 - m)
        v[-1] = 0.0
        ui = 1e-30
        F = -k[M - 1] * (ui / h[M - 1]) ** e1
        v[-2] = ui
        for i in range(M - 1, m, -1):
            # F holds F_i; step to F_{i-1} and u_{i-1}
            F -= (q[i] - lam * w[i]) * ui**e1
            y = F / k[i - 1]
            d = y**inv if y >= 0.0 else -((-y) ** inv)
            ui = ui - h[i - 1] * d
            v[i - 1 - m] = ui
            if ui > 1e50:
                v[i - 1 - m:] *= 1e-50
                F *= 1e-50**e1
                ui *= 1e-50
        return v / v[0]

    def el_residual(self, u: np.ndarray, lam: float, stop: Optional[int] = None) -> float:
        """Relative Euler-Lagrange defect at the free nodes ``0..stop-1`` (default M)."""
        p = self.p
        d = np.diff(u) / self.h
        F = self.k * np.abs(d) ** (p - 2) * d
        phi = np.abs(u[:-1]) ** (p - 2) * u[:-1]
        src = (self.q[:-1] - lam * self.w[:-1]) * phi
        Fprev = np.concatenate([[0.0], F[:-1]])
        el = (Fprev - F + src)[:stop]
        F, Fprev, src = F[:stop], Fprev[:stop], src[:stop]
        scale = np.linalg.norm(F) + np.linalg.norm(Fprev) + np.linalg.norm(src)
        return float(np.linalg.norm(el) / scale) if scale > 0 else 0.0


def _shooting(spec: ProblemSpec, grid: RadialGrid, config: SolverConfig,
              guess: Optional[float]) -> SpectralResult:
    D = _Discrete(spec, grid)
    veff = spec.grid_effective_potential(grid)
    lo = float(np.min(veff)) - 1.0
    buf = np.empty(D.M + 1)
    evals = 0

    def crosses(lam):
        nonlocal evals
        evals += 1
        return D.shoot(lam, buf)[0] >= 0

    if crosses(lo):
        raise SolverFailure("lower bracket crosses zero; discrete Sturm bracket failed")
    hi = None
    if guess is not None and guess > lo:
        # narrow bracket around a warm-start estimate
        for f in (1.5, 4.0):
            a = guess - f * abs(guess) - 1e-14
            b = guess + f * abs(guess) + 1e-14
            if a > lo and not crosses(a):
                lo = a
            if crosses(b):
                hi = b
                break
    if hi is None:
        step = max(1.0, abs(lo))
        hi = lo + step
        while not crosses(hi):
            lo = hi
            step *= 2.0
            hi = lo + step
            if step > 1e12:
                raise SolverFailure("could not bracket the principal eigenvalue")
    it = 0
    while it < 400:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if hi - lo <= 1e-13 * max(abs(lo), abs(hi)) + 1e-300:
            break
        if crosses(mid):
            hi = mid
        else:
            lo = mid
        it += 1
    lam = 0.5 * (lo + hi)
    u = D.shoot(lo)[1].copy()
    m = D.match_index(u, D.shoot(hi)[1])
    u[m:] = D.shoot_back(lam, m) * u[m]
    u[-1] = 0.0
    ef = grid.field(u)
    resid = D.el_residual(u, lam)
    b = energy(spec, ef)
    converged = (hi - lo) <= config.lambda_tolerance(lam)
    return SpectralResult(lam=lam, eigenfunction=ef, residual=resid, R_max=grid.R_max,
                          iterations=evals, converged=bool(converged), alpha=spec.alpha,
                          flags={"bracket": (lo, hi), "method": "shooting"}, breakdown=b)


def tridiagonal_eigenvalue(spec: ProblemSpec, grid: RadialGrid):
    """Exact smallest eigenpair of the p = 2 discrete problem (Dirichlet at R_max)."""
    if spec.p != 2:
        raise ValueError("tridiagonal route is only valid for p = 2")
    D = _Discrete(spec, grid)
    kk = D.k / D.h  # k_i / h_i = shell measure / h^2
    diag = D.q.copy()
    diag[:-1] += kk
    diag[1:] += kk
    diag = diag[:-1]
    off = -kk[:-1]
    s = 1.0 / np.sqrt(D.w[:-1])
    vals, vecs = eigh_tridiagonal(diag * s * s, off * s[:-1] * s[1:], select="i", select_range=(0, 0))
    v = vecs[:, 0] * s
    v = np.concatenate([v / v[0], [0.0]])
    return float(vals[0]), grid.field(v)


def _descent(spec: ProblemSpec, grid: RadialGrid, config: SolverConfig,
             initial: Optional[RadialField]) -> SpectralResult:
    p = spec.p
    D = _Discrete(spec, grid)
    w = D.w
    if initial is None:
        from .potentials import GroundStateProfile  # noqa: F401  (type only)
        rng = np.random.default_rng(config.seed)
        base = spec.phi0(grid.nodes) if spec.phi0 is not None else np.ones(len(grid))
        u = base * np.exp(-grid.nodes / grid.R_max)
        u = u * (1.0 + 1e-3 * rng.standard_normal(u.size))
    else:
        u = np.array(initial.values, dtype=float)
    u = np.abs(u)
    u[-1] = 0.0

    def normalise(x):
        return x / np.dot(w, np.abs(x) ** p) ** (1.0 / p)

    def quotient(x):
        return rayleigh(spec, grid.field(x))

    # p = 2 stiffness plus mass as a Sobolev preconditioner
    kk = D.k / D.h
    shift = 1.0 + float(np.max(np.abs(spec.grid_effective_potential(grid))))
    dg = np.zeros(D.M + 1)
    dg[:-1] += kk
    dg[1:] += kk
    dg += shift * w
    ab = np.zeros((3, D.M))
    ab[0, 1:] = -kk[:-1]
    ab[1, :] = dg[:-1]
    ab[2, :-1] = -kk[:-1]

    u = normalise(u)
    R = quotient(u)
    history = [R]
    step = config.step_init
    fails = 0
    converged = False
    resid = np.inf
    it = 0
    for it in range(1, config.max_iterations + 1):
        d = np.diff(u) / D.h
        F = D.k * np.abs(d) ** (p - 2) * d
        g = np.zeros_like(u)
        g[:-1] -= F
        g[1:] += F
        g += (D.q - R * w) * np.abs(u) ** (p - 2) * u
        g[-1] = 0.0
        direction = np.zeros_like(u)
        direction[:-1] = -solve_banded((1, 1), ab, g[:-1])
        slope = float(np.dot(g, direction))
        resid = D.el_residual(u, R)
        accepted = False
        s = step
        for _ in range(60):
            trial = np.abs(u + s * direction)
            trial[-1] = 0.0
            trial = normalise(trial)
            Rt = quotient(trial)
            if Rt <= R + 1e-4 * s * slope * p:
                accepted = True
                break
            s *= config.backtracking
        if not accepted:
            fails += 1
            if fails >= 20:
                raise SolverFailure("no decrease over 20 consecutive backtracked steps",
                                    grid.field(u))
            step = max(step * config.backtracking, 1e-12)
            continue
        fails = 0
        dR = R - Rt
        u, R = trial, Rt
        history.append(R)
        step = min(2.0 * s, 1e6)
        if dR <= config.lambda_tolerance(R) and resid <= config.tolerance_residual:
            converged = True
            break
    u = u / u[0]
    ef = grid.field(u)
    b = energy(spec, ef)
    return SpectralResult(lam=R, eigenfunction=ef, residual=resid, R_max=grid.R_max,
                          iterations=it, converged=converged, alpha=spec.alpha,
                          flags={"method": "descent"}, history=history, breakdown=b)


def solve_ground_state(spec: ProblemSpec, grid: RadialGrid, config: SolverConfig = SolverConfig(),
                       initial: Optional[RadialField] = None, guess: Optional[float] = None) -> SpectralResult:
    """Minimise the discrete Rayleigh quotient with Dirichlet data at ``grid.R_max``.

    ``initial`` seeds the descent route; ``guess`` (a previous eigenvalue) narrows
    the shooting bracket.  The eigenfunction is returned with value 1 at r = 0.
    """
    if config.method == "descent":
        return _descent(spec, grid, config, initial)
    if config.method == "tridiagonal":
        lam, ef = tridiagonal_eigenvalue(spec, grid)
        D = _Discrete(spec, grid)
        return SpectralResult(lam=lam, eigenfunction=ef, residual=D.el_residual(ef.values, lam),
                              R_max=grid.R_max, iterations=1, converged=True, alpha=spec.alpha,
                              flags={"method": "tridiagonal"}, breakdown=energy(spec, ef))
    return _shooting(spec, grid, config, guess)


GridFactory = Callable[[int, float], RadialGrid]


def default_grid(N: int, R: float) -> RadialGrid:
    """Geometric (ratio 1.005) from h = 5e-3, spacing capped at ``R / 2000``."""
    return geometric_grid(N, R, h_min=5e-3, ratio=1.005, h_max=max(R / 2000.0, 0.05))


def decay_rate(lam: float, p: float) -> float:
    """``(|lam| / (p-1))^(1/p)``, the exponential decay rate of the minimiser."""
    return (abs(lam) / (p - 1.0)) ** (1.0 / p) if lam < 0 else 0.0


def solve_with_domain_extrapolation(spec: ProblemSpec, config: SolverConfig, R_schedule: Sequence[float],
                                    grid_factory: GridFactory = default_grid,
                                    guess: Optional[float] = None, zero_tol: float = 1e-5) -> SpectralResult:
    """Solve on each radius in ``R_schedule``; report the largest.

    Flags ``truncation_converged`` when the last two eigenvalues differ by less
    than 1% relative, or when neither radius has a bound state and the larger
    one gives ``0 <= lam <= zero_tol`` (Dirichlet values decrease to the
    whole-space value, which is then in ``[lam, 0]`` up to sign).  Flags
    ``schedule_short`` when the largest radius is below ``10 / mu``.
    """
    radii = sorted(float(r) for r in R_schedule)
    if len(radii) < 2:
        raise ValueError("R_schedule needs at least two radii")
    lams = []
    res = None
    for R in radii:
        res = solve_ground_state(spec, grid_factory(spec.N, R), config, guess=guess)
        guess = res.lam
        lams.append(res.lam)
    a, b = lams[-2], lams[-1]
    scale = max(abs(a), abs(b))
    close = abs(a - b) < 0.01 * scale or (a >= 0 and 0 <= b <= zero_tol)
    mu = decay_rate(b, spec.p)
    res.flags.update({
        "truncation_converged": bool(close),
        "schedule_short": bool(mu > 0 and radii[-1] < 10.0 / mu),
        "schedule": radii,
        "lambdas": lams,
    })
    return res


def auto_radius(spec: ProblemSpec, config: SolverConfig, R_min: float = 100.0, R_cap: float = 1e7,
                grid_factory: GridFactory = default_grid, guess: Optional[float] = None,
                factor: float = 12.0, max_growth: int = 3) -> SpectralResult:
    """Grow the truncation radius until ``R >= factor / mu``, then check with ``(R, 2R)``.

    Without a bound state the radius is enlarged ``max_growth`` times by 4; if
    the doubled check radius then reveals one, sizing resumes from its rate.
    """
    R = float(R_min)
    if guess is not None and guess < 0:
        R = max(R, factor / decay_rate(guess, spec.p))
    grown = 0
    for _ in range(4):
        for _ in range(40):
            R = min(R, R_cap)
            res = solve_ground_state(spec, grid_factory(spec.N, R), config, guess=guess)
            mu = decay_rate(res.lam, spec.p)
            if R >= R_cap:
                break
            if mu == 0:
                if grown >= max_growth:
                    break
                grown += 1
                R *= 4.0
                continue
            if R * mu >= factor:
                break
            guess = res.lam
            R = 1.25 * factor / mu
        final = solve_with_domain_extrapolation(spec, config, (R, min(2 * R, max(R_cap, R))),
                                                grid_factory, guess=res.lam)
        mu2 = decay_rate(final.lam, spec.p)
        if mu2 == 0 or R * mu2 >= factor or R >= R_cap:
            return final
        guess = final.lam
        R = 1.25 * factor / mu2
    return final


def lambda_curve(spec: ProblemSpec, alphas: Sequence[float], config: SolverConfig = SolverConfig(),
                 R_min: float = 100.0, grid_factory: GridFactory = default_grid,
                 R_cap: float = 1e7, on_result: Optional[Callable] = None):
    """Warm-started sweep over a decreasing list of couplings.

    Returns ``[(alpha, SpectralResult or SolverFailure)]``.  ``on_result`` is
    called after every point (used for crash-safe CSV appends).
    """
    alphas = [float(a) for a in alphas]
    if any(b > a for a, b in zip(alphas, alphas[1:])):
        raise ValueError("alpha list must be sorted decreasing")
    out = []
    guess = None
    prev_alpha = None
    for a in alphas:
        s = spec.with_alpha(a)
        g = None
        if guess is not None and guess < 0 and prev_alpha:
            # extrapolate with the superlinear order as a rough warm start
            g = guess * (a / prev_alpha) ** 1.5
        try:
            res = auto_radius(s, config, R_min=R_min, R_cap=R_cap, grid_factory=grid_factory, guess=g)
            guess, prev_alpha = res.lam, a
        except SolverFailure as exc:
            log.warning("solver failure at alpha=%g: %s", a, exc)
            res = exc
        out.append((a, res))
        if on_result is not None:
            on_result(a, res)
    return out


def is_concave(alphas: Sequence[float], lams: Sequence[float], tol: float = 0.0) -> bool:
    """Discrete concavity: slopes between consecutive points are nonincreasing."""
    order = np.argsort(alphas)
    a = np.asarray(alphas, dtype=float)[order]
    l = np.asarray(lams, dtype=float)[order]
    slopes = np.diff(l) / np.diff(a)
    return bool(np.all(np.diff(slopes) <= tol))
