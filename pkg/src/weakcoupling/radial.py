"""Radial grids, N-dimensional quadrature and the radial p-Laplacian.

Functions of ``r = |x|`` are sampled on a one-dimensional grid ``0 = r_0 < ... < r_M``.
Integrals over the ball ``B_{R_max}`` in R^N are approximated with the exact
moments of the piecewise-linear hat functions against ``r^(N-1) dr``, scaled by
the area of the unit sphere.  The same cell measures drive the discrete
kinetic energy used by the eigensolver.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import gamma as gamma_fn

# |f'| below this is regularised in |f'|^(p-2) when p < 2
EPS_GRAD = 1e-14

_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(8)


def sphere_area(N: int) -> float:
    """Surface area of the unit sphere in R^N."""
    return 2.0 * np.pi ** (N / 2.0) / gamma_fn(N / 2.0)


def ball_volume(N: int, R: float) -> float:
    return sphere_area(N) * R**N / N


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Radial nodes with N-dimensional volume weights.

    ``weights[i]`` is ``|S^{N-1}| * int hat_i(r) r^{N-1} dr`` and ``cell_measure[i]``
    is the volume of the shell ``r_i < |x| < r_{i+1}``.
    """

    nodes: np.ndarray
    N: int
    weights: np.ndarray = field(init=False, repr=False)
    cell_measure: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        r = np.asarray(self.nodes, dtype=float)
        if r.ndim != 1 or r.size < 3:
            raise ValueError("grid needs at least 3 nodes")
        if r[0] != 0.0:
            raise ValueError("first node must be r=0")
        h = np.diff(r)
        if np.any(h <= 0):
            raise ValueError("nodes must be strictly increasing")
        if self.N < 1:
            raise ValueError("dimension N must be >= 1")
        r.setflags(write=False)
        object.__setattr__(self, "nodes", r)

        area = sphere_area(self.N)
        # Gauss-Legendre on every cell; exact for N <= 15
        s = 0.5 * (_GAUSS_X + 1.0)
        pts = r[:-1, None] + h[:, None] * s[None, :]
        jac = pts ** (self.N - 1) * (0.5 * _GAUSS_W)[None, :] * h[:, None]
        left = np.sum(jac * (1.0 - s)[None, :], axis=1)
        right = np.sum(jac * s[None, :], axis=1)
        w = np.zeros_like(r)
        w[:-1] += left
        w[1:] += right
        w *= area
        cm = area * (left + right)
        w.setflags(write=False)
        cm.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "cell_measure", cm)

    @property
    def R_max(self) -> float:
        return float(self.nodes[-1])

    @property
    def spacing(self) -> np.ndarray:
        return np.diff(self.nodes)

    def __len__(self) -> int:
        return self.nodes.size

    def field(self, values, positive: bool = False) -> "RadialField":
        return RadialField(self, np.asarray(values, dtype=float), positive=positive)

    def sample(self, fn: Callable[[np.ndarray], np.ndarray], positive: bool = False) -> "RadialField":
        return RadialField(self, np.asarray(fn(self.nodes), dtype=float) * np.ones(len(self)), positive=positive)


@dataclass(frozen=True, eq=False)
class RadialField:
    """Values of a radial function at the nodes of ``grid``."""

    grid: RadialGrid
    values: np.ndarray
    positive: bool = False

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.grid.nodes.shape:
            raise ValueError(f"field has {v.size} values for {len(self.grid)} nodes")
        if self.positive and not np.all(v > 0):
            raise ValueError("field flagged positive has non-positive values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __mul__(self, c: float) -> "RadialField":
        return RadialField(self.grid, self.values * c, positive=self.positive and c > 0)

    __rmul__ = __mul__


def make_grid(N: int, R_max: float, M: int, grading="uniform") -> RadialGrid:
    """Build a grid with ``M`` intervals on ``[0, R_max]``.

    ``grading`` is ``"uniform"`` or ``("geometric", ratio)`` with ratio in (1, 1.2];
    geometric cells grow by ``ratio`` from the origin outward.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if not R_max > 0:
        raise ValueError("R_max must be positive")
    if M < 16:
        raise ValueError("need M >= 16 intervals")
    if grading == "uniform":
        nodes = np.linspace(0.0, R_max, M + 1)
    else:
        kind, ratio = grading
        if kind != "geometric":
            raise ValueError(f"unknown grading {kind!r}")
        if not 1.0 < ratio <= 1.2:
            raise ValueError("geometric ratio must lie in (1, 1.2]")
        steps = ratio ** np.arange(M)
        nodes = np.concatenate([[0.0], np.cumsum(steps)])
        nodes *= R_max / nodes[-1]
        nodes[-1] = R_max
    return RadialGrid(nodes, N)


def geometric_grid(N: int, R_max: float, h_min: float = 5e-3, ratio: float = 1.005,
                   h_max: Optional[float] = None) -> RadialGrid:
    """Geometric grid whose first cell is about ``h_min`` wide.

    With ``h_max`` the cells stop growing once they reach that width and the
    rest of ``[0, R_max]`` is covered uniformly.
    """
    if h_max is None or h_max >= R_max:
        M = int(np.ceil(np.log1p(R_max * (ratio - 1.0) / h_min) / np.log(ratio)))
        return make_grid(N, R_max, max(M, 16), ("geometric", ratio))
    if not 1.0 < ratio <= 1.2:
        raise ValueError("geometric ratio must lie in (1, 1.2]")
    n_geo = max(int(np.floor(np.log(h_max / h_min) / np.log(ratio))), 0)
    steps = h_min * ratio ** np.arange(n_geo + 1)
    inner = np.concatenate([[0.0], np.cumsum(steps)])
    inner = inner[inner < R_max]
    rest = R_max - inner[-1]
    n_uni = max(int(np.ceil(rest / h_max)), 1)
    outer = inner[-1] + rest * np.arange(1, n_uni + 1) / n_uni
    nodes = np.concatenate([inner, outer])
    nodes[-1] = R_max
    if nodes.size < 17:
        return make_grid(N, R_max, 16, "uniform")
    return RadialGrid(nodes, N)


def integrate(f: RadialField) -> float:
    return float(np.dot(f.grid.weights, f.values))


def radial_gradient(f: RadialField) -> RadialField:
    """Second-order nodal derivative ``u'(r)``; zero at the origin (even extension)."""
    g = np.gradient(f.values, f.grid.nodes, edge_order=2)
    g[0] = 0.0
    return RadialField(f.grid, g)


@dataclass(frozen=True)
class RadialFunction:
    """A radial profile with analytic first and second derivatives."""

    value: Callable[[np.ndarray], np.ndarray]
    d1: Callable[[np.ndarray], np.ndarray]
    d2: Callable[[np.ndarray], np.ndarray]

    def __call__(self, r):
        return self.value(r)


def radial_p_laplacian(f: RadialFunction, p: float, N: int) -> Callable[[np.ndarray], np.ndarray]:
    """Return ``r -> -Delta_p f(r)`` from the expanded radial form.

    ``-|f'|^(p-2) [(p-1) f'' + (N-1) f'/r]``.  For p < 2 the degenerate factor
    uses ``(|f'| + EPS_GRAD)^(p-2)``.
    """
    if p <= 1:
        raise ValueError("p must exceed 1")

    def minus_delta_p(r):
        r = np.asarray(r, dtype=float)
        if np.any(r <= 0):
            raise ValueError("radial p-Laplacian evaluated at r <= 0; exclude the origin")
        d1 = np.asarray(f.d1(r), dtype=float)
        d2 = np.asarray(f.d2(r), dtype=float)
        a = np.abs(d1)
        if p == 2:
            fac = np.ones_like(a)
        elif p < 2:
            fac = (a + EPS_GRAD) ** (p - 2)
        else:
            fac = a ** (p - 2)
        return -fac * ((p - 1) * d2 + (N - 1) * d1 / r)

    return minus_delta_p


def power_function(s: float) -> RadialFunction:
    """``r^s`` with its derivatives."""
    return RadialFunction(
        lambda r: np.asarray(r, dtype=float) ** s,
        lambda r: s * np.asarray(r, dtype=float) ** (s - 1),
        lambda r: s * (s - 1) * np.asarray(r, dtype=float) ** (s - 2),
    )
