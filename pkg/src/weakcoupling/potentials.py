"""Critical potentials built from prescribed ground states, and perturbations.

A critical ``V`` is produced by inverting the ground-state equation: given a
positive profile ``phi`` we set ``V = Delta_p phi / phi^(p-1)``, so ``phi`` solves
``-Delta_p phi + V phi^(p-1) = 0`` exactly and is the ground state of ``-Delta_p + V``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import BPoly

from .radial import RadialFunction, RadialGrid, integrate, radial_p_laplacian


@dataclass(frozen=True)
class Potential:
    """A radial potential ``r -> value``.

    ``support_radius`` certifies ``value(r) == 0`` for ``r > support_radius``;
    ``decay_certificate`` certifies ``|value(r)| <= C (1 + r^2)^(-p/2)``.
    """

    profile: Callable[[np.ndarray], np.ndarray]
    support_radius: Optional[float] = None
    decay_certificate: Optional[float] = None
    name: str = ""

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return np.asarray(self.profile(r), dtype=float) * np.ones_like(r)

    def scaled(self, a: float) -> "Potential":
        cert = None if self.decay_certificate is None else abs(a) * self.decay_certificate
        return Potential(lambda r: a * self.profile(r), self.support_radius, cert, f"{a}*{self.name}")

    def check_support(self, r_max: float, samples: int = 4001) -> bool:
        if self.support_radius is None:
            return True
        r = np.linspace(self.support_radius, r_max, samples)[1:]
        return bool(np.all(self(r) == 0.0))

    def check_decay(self, p: float, r: np.ndarray) -> bool:
        if self.decay_certificate is None:
            return True
        return bool(np.all(np.abs(self(r)) <= self.decay_certificate * (1 + r**2) ** (-p / 2)))


ZERO = Potential(lambda r: np.zeros_like(np.asarray(r, dtype=float)), support_radius=0.0,
                 decay_certificate=0.0, name="zero")


@dataclass(frozen=True)
class GroundStateProfile:
    """Positive radial profile with ``profile(0) == 1`` and algebraic tail."""

    profile: RadialFunction
    p: float
    N: int
    kind: str = ""
    glue_radius: Optional[float] = None

    @property
    def tail_exponent(self) -> float:
        return (self.p - self.N) / (self.p - 1)

    @property
    def nu0(self) -> float:
        return (self.N - self.p) / (self.p - 1)

    def __call__(self, r):
        return self.profile.value(r)


def _check_subcritical(p, N):
    if not 1 < p < N:
        raise ValueError(f"need 1 < p < N for a decaying ground state, got p={p}, N={N}")


def smooth_tail_profile(p: float, N: int) -> GroundStateProfile:
    """``phi0(r) = (1 + r^2)^(-nu0/2)`` with ``nu0 = (N-p)/(p-1)``."""
    _check_subcritical(p, N)
    a = (N - p) / (p - 1) / 2.0

    def value(r):
        return (1.0 + np.asarray(r, dtype=float) ** 2) ** (-a)

    def d1(r):
        r = np.asarray(r, dtype=float)
        return -2 * a * r * (1.0 + r**2) ** (-a - 1)

    def d2(r):
        r = np.asarray(r, dtype=float)
        q = 1.0 + r**2
        return -2 * a * q ** (-a - 1) + 4 * a * (a + 1) * r**2 * q ** (-a - 2)

    return GroundStateProfile(RadialFunction(value, d1, d2), p, N, kind="smooth_tail")


def glued_power_profile(p: float, N: int, R0: float) -> GroundStateProfile:
    """Profile equal to 1 on ``[0, R0/2]`` and to ``c r^(-nu0)`` on ``[R0, inf)``.

    The two pieces are joined by the quintic Hermite polynomial matching value,
    slope and curvature at both ends; ``c = (3 R0 / 4)^nu0`` puts the tail's unit
    level at the middle of the blend.  The induced potential is supported in
    ``[R0/2, R0]``.
    """
    _check_subcritical(p, N)
    if R0 < 1:
        raise ValueError("gluing radius must be >= 1")
    nu = (N - p) / (p - 1)
    a, b = 0.5 * R0, float(R0)
    c = (0.75 * R0) ** nu
    tail = (c * b**-nu, -nu * c * b ** (-nu - 1), nu * (nu + 1) * c * b ** (-nu - 2))
    blend = BPoly.from_derivatives([a, b], [[1.0, 0.0, 0.0], list(tail)])
    dblend, ddblend = blend.derivative(1), blend.derivative(2)

    def piecewise(r, inner, mid, outer):
        r = np.asarray(r, dtype=float)
        out = np.empty_like(r)
        lo, hi = r <= a, r >= b
        md = ~(lo | hi)
        out[lo] = inner(r[lo])
        out[md] = mid(r[md])
        out[hi] = outer(r[hi])
        return out

    prof = RadialFunction(
        lambda r: piecewise(r, np.ones_like, blend, lambda s: c * s**-nu),
        lambda r: piecewise(r, np.zeros_like, dblend, lambda s: -nu * c * s ** (-nu - 1)),
        lambda r: piecewise(r, np.zeros_like, ddblend, lambda s: nu * (nu + 1) * c * s ** (-nu - 2)),
    )
    return GroundStateProfile(prof, p, N, kind="glued", glue_radius=float(R0))


def potential_from_profile(phi: GroundStateProfile, p: Optional[float] = None,
                           N: Optional[int] = None, check_radius: float = 1e3) -> Potential:
    """``V = Delta_p phi / phi^(p-1)`` so that ``phi`` is an exact positive solution."""
    p = phi.p if p is None else p
    N = phi.N if N is None else N
    minus_lap = radial_p_laplacian(phi.profile, p, N)

    def V(r):
        r = np.asarray(r, dtype=float)
        out = np.empty_like(r)
        val = phi.profile.value(r)
        if np.any(val <= 0):
            raise ValueError("ground-state profile must be positive")
        pos = r > 0
        out[pos] = -minus_lap(r[pos]) / val[pos] ** (p - 1)
        if np.any(~pos):
            # limit r -> 0 from a short one-sided extrapolation
            h = 1e-6
            v1, v2 = -minus_lap(np.array([h, 2 * h])) / phi.profile.value(np.array([h, 2 * h])) ** (p - 1)
            out[~pos] = 2 * v1 - v2
        return out

    support = phi.glue_radius
    rs = np.concatenate([np.linspace(1e-3, 10, 2001), np.geomspace(10, check_radius, 2001)])
    if support is not None:
        tail = rs[rs > support]
        if np.max(np.abs(V(tail))) > 1e-8:
            support = None
        else:
            support = float(support)
            raw = V

            def V(r, _raw=raw, _s=support):
                # the tail c r^(-nu0) is p-harmonic; drop the rounding noise
                r = np.asarray(r, dtype=float)
                return np.where(r >= _s, 0.0, _raw(r))
    vals = np.abs(V(rs)) * (1 + rs**2) ** (p / 2)
    cert = float(np.max(vals)) * (1 + 1e-9)
    if support is None and not np.isfinite(cert):
        cert = None
    return Potential(V, support_radius=support, decay_certificate=cert,
                     name=f"critical[{phi.kind}]")


def bump_perturbation(radius: float, amplitude: float) -> Potential:
    """``W(r) = a * max(0, 1 - (r/rho)^2)^2``."""
    if not radius > 0:
        raise ValueError("bump radius must be positive")

    def W(r):
        r = np.asarray(r, dtype=float)
        return amplitude * np.maximum(0.0, 1.0 - (r / radius) ** 2) ** 2

    return Potential(W, support_radius=float(radius), decay_certificate=None,
                     name=f"bump({radius},{amplitude})")


def step_well(radius: float = 1.0, width: float = 2e-3, depth: float = 1.0) -> Potential:
    """Smoothed indicator of the ball ``|x| < radius`` (logistic edge of given width)."""

    def W(r):
        r = np.asarray(r, dtype=float)
        z = np.clip((r - radius) / width, -700, 700)
        return depth / (1.0 + np.exp(z))

    return Potential(W, name=f"well({radius})")


def check_condition(W: Potential, phi0: GroundStateProfile, grid: RadialGrid, p: Optional[float] = None) -> float:
    """Quadrature of ``int W phi0^p dx``; the sign decides the weak-coupling regime."""
    p = phi0.p if p is None else p
    r = grid.nodes
    return integrate(grid.field(W(r) * phi0(r) ** p))


def write_potential(path, V: Potential, r: np.ndarray, p: float, N: int,
                    comments: Sequence[str] = ()) -> Path:
    """Two-column ``r value`` table after a ``# radial-potential`` header line."""
    path = Path(path)
    vals = V(np.asarray(r, dtype=float))
    lines = [f"# radial-potential p={p!r} N={int(N)}"] + [f"# {c}" for c in comments]
    lines += [f"{ri!r} {vi!r}" for ri, vi in zip(np.asarray(r, dtype=float).tolist(), vals.tolist())]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_potential(path):
    """Read a radial-potential table; returns ``(r, values, p, N)``."""
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith("# radial-potential"):
        raise ValueError(f"{path}: missing '# radial-potential' header")
    meta = dict(tok.split("=", 1) for tok in text[0].split()[2:])
    body = [ln for ln in text[1:] if ln.strip() and not ln.lstrip().startswith("#")]
    rows = np.array([[float(x) for x in ln.split()] for ln in body], dtype=float)
    return rows[:, 0], rows[:, 1], float(meta["p"]), int(meta["N"])


def tabulated_potential(r: np.ndarray, values: np.ndarray, name: str = "table") -> Potential:
    """Piecewise-linear potential from a table; zero beyond the last radius."""
    r = np.asarray(r, dtype=float)
    values = np.asarray(values, dtype=float)
    nz = np.nonzero(values)[0]
    support = float(r[nz[-1] + 1]) if nz.size and nz[-1] + 1 < r.size else None

    def V(s):
        return np.interp(np.asarray(s, dtype=float), r, values, right=0.0)

    return Potential(V, support_radius=support, name=name)
