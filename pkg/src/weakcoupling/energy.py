"""Discrete energy functionals on radial grids.

The kinetic term uses the cellwise slope of the piecewise-linear interpolant,
integrated exactly against the shell volume; potential and mass terms use the
lumped nodal weights of :class:`~weakcoupling.radial.RadialGrid`.  This is the
functional whose minimum the eigensolver computes.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .potentials import ZERO, GroundStateProfile, Potential
from .radial import RadialField, RadialGrid, radial_gradient

REGIMES = ("N<p", "N=p", "p<N<p^2", "N=p^2", "N>p^2")


def classify_regime(p: float, N: int) -> str:
    if N < p:
        return "N<p"
    if N == p:
        return "N=p"
    if np.isclose(N, p * p):
        return "N=p^2"
    return "p<N<p^2" if N < p * p else "N>p^2"


@dataclass(frozen=True)
class ProblemSpec:
    """``Q_{aW}[u] = int |u'|^p + V|u|^p - alpha W|u|^p`` over R^N, radial u."""

    p: float
    N: int
    V: Potential = ZERO
    W: Potential = ZERO
    alpha: float = 0.0
    phi0: Optional[GroundStateProfile] = None
    # use the grid potential making sampled phi0 an exact discrete solution
    discrete_critical: bool = True

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError("p must exceed 1")
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.alpha < 0:
            raise ValueError("coupling alpha must be >= 0")
        if self.p >= self.N and self.V is not ZERO and self.V.name != "zero":
            raise ValueError(f"regime {self.regime}: p >= N requires V == 0")

    @property
    def regime(self) -> str:
        return classify_regime(self.p, self.N)

    @property
    def nu0(self) -> float:
        return (self.N - self.p) / (self.p - 1)

    @property
    def nu1(self) -> float:
        return (self.N - 1) / (self.p - 1)

    @property
    def sobolev_exponent(self) -> float:
        if self.p >= self.N:
            return np.inf
        return self.N * self.p / (self.N - self.p)

    def with_alpha(self, alpha: float) -> "ProblemSpec":
        return replace(self, alpha=float(alpha))

    def effective_potential(self, r: np.ndarray) -> np.ndarray:
        return self.V(r) - self.alpha * self.W(r)

    def grid_potential(self, grid: RadialGrid) -> np.ndarray:
        """Samples of V on ``grid`` as seen by the discrete functional.

        With a known ground state the nodal values are chosen so that the
        sampled ``phi0`` satisfies the discrete Euler-Lagrange equations at
        ``lambda = 0`` exactly; sampling V directly would leave an O(h^2)
        criticality defect that swamps ``lambda(alpha)`` at small ``alpha``.
        """
        if self.phi0 is None or not self.discrete_critical:
            return self.V(grid.nodes)
        return discrete_critical_potential(grid, self.phi0(grid.nodes), self.p)

    def grid_effective_potential(self, grid: RadialGrid) -> np.ndarray:
        return self.grid_potential(grid) - self.alpha * self.W(grid.nodes)


def discrete_critical_potential(grid: RadialGrid, phi: np.ndarray, p: float) -> np.ndarray:
    """Nodal V with ``F_i - F_{i-1} = w_i V_i phi_i^(p-1)`` for the fluxes of ``phi``.

    The last node carries the Dirichlet condition and gets the value of its
    neighbour.
    """
    phi = np.asarray(phi, dtype=float)
    if np.any(phi <= 0):
        raise ValueError("ground state samples must be positive")
    h = grid.spacing
    d = np.diff(phi) / h
    F = grid.cell_measure / h * np.abs(d) ** (p - 2) * d
    Fprev = np.concatenate([[0.0], F[:-1]])
    V = np.empty_like(phi)
    V[:-1] = (F - Fprev) / (grid.weights[:-1] * phi[:-1] ** (p - 1))
    V[-1] = V[-2]
    return V


@dataclass(frozen=True)
class EnergyBreakdown:
    kinetic: float
    potential_V: float
    potential_W: float
    alpha: float
    mass: float

    @property
    def total(self) -> float:
        return self.kinetic + self.potential_V - self.alpha * self.potential_W

    def as_dict(self) -> dict:
        return {"mass": self.mass, "kinetic": self.kinetic, "potential_V": self.potential_V,
                "potential_W": self.potential_W}


def cell_slopes(u: RadialField) -> np.ndarray:
    return np.diff(u.values) / u.grid.spacing


def kinetic_energy(u: RadialField, p: float) -> float:
    return float(np.dot(u.grid.cell_measure, np.abs(cell_slopes(u)) ** p))


def energy(spec: ProblemSpec, u: RadialField) -> EnergyBreakdown:
    g = u.grid
    if g.N != spec.N:
        raise ValueError(f"grid dimension {g.N} does not match problem dimension {spec.N}")
    up = np.abs(u.values) ** spec.p
    w_up = g.weights * up
    r = g.nodes
    return EnergyBreakdown(
        kinetic=kinetic_energy(u, spec.p),
        potential_V=float(np.dot(w_up, spec.grid_potential(g))),
        potential_W=float(np.dot(w_up, spec.W(r))),
        alpha=spec.alpha,
        mass=float(np.sum(w_up)),
    )


def rayleigh(spec: ProblemSpec, u: RadialField) -> float:
    e = energy(spec, u)
    if not e.mass > 0:
        raise ZeroDivisionError("Rayleigh quotient of a zero field")
    return e.total / e.mass


def simplified_energy(phi0: RadialField, u: RadialField, p: float,
                      dphi0: Optional[RadialField] = None) -> float:
    """``int phi0^2 |v'|^2 (v |phi0'| + phi0 |v'|)^(p-2) dx`` with ``v = u / phi0``.

    ``dphi0`` may carry the exact derivative of ``phi0``; otherwise it is
    differentiated on the grid.
    """
    if np.any(phi0.values <= 0):
        raise ValueError("phi0 must be positive on the grid")
    g = phi0.grid
    v = g.field(u.values / phi0.values)
    dv = np.abs(radial_gradient(v).values)
    dphi = np.abs((radial_gradient(phi0) if dphi0 is None else dphi0).values)
    base = np.abs(v.values) * dphi + phi0.values * dv
    with np.errstate(divide="ignore", invalid="ignore"):
        mixed = np.where(dv > 0, base ** (p - 2), 0.0)
    integrand = phi0.values**2 * dv**2 * mixed
    return float(np.dot(g.weights, integrand))


def two_sided_check(spec: ProblemSpec, phi0: RadialField, trials: Sequence[RadialField],
                    dphi0: Optional[RadialField] = None, floor: float = 1e-12):
    """Range of ``Q_0[u] / simplified_energy(u)`` over nonnegative trials.

    Trials where both sides fall below ``floor`` are skipped.  Returns
    ``(low, high)`` or ``(nan, nan)`` if nothing qualified.
    """
    base = replace(spec, alpha=0.0)
    ratios = []
    for u in trials:
        if np.any(u.values < 0) or not np.any(u.values):
            raise ValueError("trials must be nonnegative and nonzero")
        q0 = energy(base, u).total
        se = simplified_energy(phi0, u, spec.p, dphi0)
        if abs(q0) < floor and abs(se) < floor:
            continue
        ratios.append(q0 / se)
    if not ratios:
        return (float("nan"), float("nan"))
    return (float(min(ratios)), float(max(ratios)))


def sample_profile(grid: RadialGrid, phi0: GroundStateProfile) -> RadialField:
    return grid.field(phi0(grid.nodes), positive=True)
