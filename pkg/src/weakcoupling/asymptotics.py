"""Regime predictions for ``lambda(alpha)`` and fits of solver curves against them.

Orders as ``alpha -> 0+`` (critical ``V``, ``int W phi0^p > 0``):

=============  ===========================================
``N < p``       ``alpha^(p/(p-N))``  (with ``V = 0``)
``p<N<p^2``     ``alpha^(p(p-1)/(N-p))``
``N = p^2``     ``alpha / |log alpha|``
``N > p^2``     ``lambda/alpha -> -omega / ||phi0||_p^p``
=============  ===========================================
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import quad

from .energy import ProblemSpec
from .radial import sphere_area

Curve = Sequence[Tuple[float, float]]


class UnsupportedRegime(ValueError):
    pass


@dataclass(frozen=True)
class Prediction:
    regime: str
    exponent: float
    constant: Optional[float] = None
    log_corrected: bool = False


def ground_state_integrals(spec: ProblemSpec):
    """``(omega, ||phi0||_p^p)`` by adaptive quadrature of the continuum profile."""
    if spec.phi0 is None:
        raise ValueError("needs the ground state phi0")
    p, N = spec.p, spec.N
    area = sphere_area(N)

    def w_int(r):
        return spec.W(np.array([r]))[0] * spec.phi0(np.array([r]))[0] ** p * r ** (N - 1)

    def m_int(r):
        return spec.phi0(np.array([r]))[0] ** p * r ** (N - 1)

    top = spec.W.support_radius
    if top is not None:
        omega = quad(w_int, 0.0, top, limit=200, epsabs=0, epsrel=1e-11)[0]
    else:
        omega = quad(w_int, 0.0, np.inf, limit=400)[0]
    mass = quad(m_int, 0.0, 10.0, limit=200, epsabs=0, epsrel=1e-11)[0]
    mass += quad(m_int, 10.0, np.inf, limit=400, epsabs=0, epsrel=1e-11)[0]
    return area * omega, area * mass


def predict(spec: ProblemSpec) -> Prediction:
    p, N = spec.p, spec.N
    reg = spec.regime
    if reg == "N=p":
        raise UnsupportedRegime("N = p has exponentially small eigenvalues; not supported")
    if reg == "N<p":
        return Prediction(reg, p / (p - N))
    if reg == "p<N<p^2":
        return Prediction(reg, p * (p - 1) / (N - p))
    if reg == "N=p^2":
        return Prediction(reg, 1.0, log_corrected=True)
    const = None
    if spec.phi0 is not None:
        omega, mass = ground_state_integrals(spec)
        const = -omega / mass
    return Prediction(reg, 1.0, const)


@dataclass
class AsymptoticFit:
    regime: Optional[str]
    model: str
    exponent: float
    constant: float
    r2: float
    window: Tuple[float, float]
    samples: int
    spread: float = float("nan")
    flags: dict = field(default_factory=dict)


def _split(curve: Curve):
    a = np.array([float(x) for x, _ in curve])
    l = np.array([float(y) for _, y in curve])
    order = np.argsort(a)
    return a[order], l[order]


def _r2(y, yhat) -> float:
    sst = float(np.sum((y - y.mean()) ** 2))
    if sst == 0:
        return 1.0
    return 1.0 - float(np.sum((y - yhat) ** 2)) / sst


def _loglog(a, l):
    x, y = np.log(a), np.log(-l)
    q, b = np.polyfit(x, y, 1)
    return float(q), float(b), _r2(y, q * x + b)


def fit_power(curve: Curve, regime: Optional[str] = None, min_samples: int = 4,
              min_decades: float = 1.5, drift_tol: float = 0.1) -> AsymptoticFit:
    """Least squares of ``log(-lambda)`` on ``log(alpha)``: ``lambda = -c alpha^q``.

    ``spread`` is the largest deviation of leave-one-out refits from ``q``.
    Flags: ``regime_violation`` when some ``lambda >= 0`` (those points are
    dropped), ``misfit`` when successive local slopes drift by more than
    ``drift_tol * q`` across the window.
    """
    a, l = _split(curve)
    if a.size < min_samples:
        raise ValueError(f"power fit needs >= {min_samples} samples, got {a.size}")
    if np.log10(a.max() / a.min()) < min_decades - 1e-12:
        raise ValueError(f"power fit needs alpha spanning >= {min_decades} decades")
    flags = {"regime_violation": bool(np.any(l >= 0))}
    keep = l < 0
    a, l = a[keep], l[keep]
    window = (float(a.min()), float(a.max())) if a.size else (float("nan"),) * 2
    if a.size < 3:
        flags["misfit"] = True
        return AsymptoticFit(regime, "pure_power", float("nan"), float("nan"), float("nan"),
                             window, int(a.size), flags=flags)
    q, b, r2 = _loglog(a, l)
    loo = [_loglog(np.delete(a, i), np.delete(l, i))[0] for i in range(a.size)]
    local = np.diff(np.log(-l)) / np.diff(np.log(a))
    flags["misfit"] = bool(abs(local[-1] - local[0]) > drift_tol * abs(q))
    flags["local_slopes"] = local.tolist()
    return AsymptoticFit(regime, "pure_power", q, math.exp(b), r2, window, int(a.size),
                         spread=float(np.max(np.abs(np.array(loo) - q))), flags=flags)


def fit_log_corrected(curve: Curve, regime: Optional[str] = "N=p^2") -> AsymptoticFit:
    """``lambda = -c alpha / (|log alpha| + a)``.

    ``alpha / (-lambda)`` is linear in ``|log alpha|`` with slope ``1/c``; the
    intercept ``a / c`` absorbs the unknown scale inside the logarithm.  ``r2``
    is measured on ``log(-lambda)`` so it compares directly with
    :func:`fit_power`.  ``spread`` is the standard deviation over the mean of
    the raw ratio ``-lambda |log alpha| / alpha``; ``flags`` carries that mean.
    """
    a, l = _split(curve)
    if np.any(a >= 1):
        raise ValueError("log-corrected fit needs alpha < 1")
    flags = {"regime_violation": bool(np.any(l >= 0))}
    keep = l < 0
    a, l = a[keep], l[keep]
    if a.size < 2:
        return AsymptoticFit(regime, "log_corrected", float("nan"), float("nan"), float("nan"),
                             (float("nan"),) * 2, int(a.size), flags=flags)
    L = np.abs(np.log(a))
    ratio = -l * L / a
    slope, icpt = np.polyfit(L, a / (-l), 1)
    c = 1.0 / slope
    model = np.log(c * a / (L + icpt * c))
    r2 = _r2(np.log(-l), model)
    flags.update({"log_shift": float(icpt * c), "ratio_mean": float(ratio.mean()),
                  "ratios": ratio.tolist()})
    return AsymptoticFit(regime, "log_corrected", 1.0, float(c), r2, (float(a.min()), float(a.max())),
                         int(a.size), spread=float(ratio.std() / ratio.mean()), flags=flags)


def richardson_limit(alphas: Sequence[float], values: Sequence[float]):
    """Extrapolate ``values(alpha)`` to ``alpha -> 0`` from a geometric alpha sequence.

    Aitken's delta-squared on the three smallest alphas (model
    ``L + K alpha^s`` with unknown ``s``).  Returns ``(limit, s)``; falls back to
    the last value with ``s = nan`` when the differences do not contract.
    """
    order = np.argsort(alphas)[::-1]
    a = np.asarray(alphas, dtype=float)[order]
    v = np.asarray(values, dtype=float)[order]
    if a.size < 3:
        raise ValueError("Richardson extrapolation needs three samples")
    v1, v2, v3 = v[-3:]
    d1, d2 = v2 - v1, v3 - v2
    if d1 == 0 or d2 == 0 or d2 / d1 <= 0 or abs(d2 / d1) >= 1:
        return float(v3), float("nan")
    ratio = d2 / d1
    s = math.log(ratio) / math.log(a[-1] / a[-2])
    return float(v3 - d2 * d2 / (d2 - d1)), float(s)


def fit_linear_limit(curve: Curve, regime: Optional[str] = "N>p^2") -> AsymptoticFit:
    """``lambda / alpha -> const``: Richardson limit of the ratio in ``alpha``.

    ``exponent`` is the pure-power slope over the window for reference.
    """
    a, l = _split(curve)
    flags = {"regime_violation": bool(np.any(l >= 0))}
    ratio = l / a
    limit, order = richardson_limit(a, ratio)
    flags.update({"richardson_order": order, "ratios": ratio.tolist()})
    q, _, r2 = _loglog(a, l) if np.all(l < 0) else (float("nan"),) * 3
    return AsymptoticFit(regime, "linear_limit", q, limit, r2, (float(a.min()), float(a.max())),
                         int(a.size), spread=float(abs(limit - ratio[0]) / abs(limit)) if limit else float("nan"),
                         flags=flags)


def fit_for_regime(curve: Curve, regime: str) -> AsymptoticFit:
    if regime == "N=p^2":
        return fit_log_corrected(curve, regime)
    if regime == "N>p^2":
        return fit_linear_limit(curve, regime)
    return fit_power(curve, regime)


def fixed_exponent_constant(curve: Curve, q: float) -> float:
    """``c`` in ``lambda = -c alpha^q`` by averaging ``log(-lambda) - q log(alpha)``."""
    a, l = _split(curve)
    if np.any(l >= 0):
        raise ValueError("needs lambda < 0 throughout")
    return float(math.exp(np.mean(np.log(-l) - q * np.log(a))))


@dataclass
class WScaling:
    amplitudes: list
    constants: list
    slope: float
    predicted: float
    nested: bool
    curves: list = field(repr=False, default_factory=list)


def check_W_scaling(spec: ProblemSpec, amplitudes: Sequence[float], alphas: Sequence[float],
                    run_curve: Optional[Callable] = None, min_span: float = 8.0) -> WScaling:
    """Fit ``c(a)`` for ``W -> a W`` and regress ``log c`` on ``log a``.

    The amplitudes must span a factor ``min_span`` (default 8, e.g. 0.5 to 4).

    ``run_curve(spec, alphas)`` returns ``[(alpha, lambda)]``; it defaults to the
    warm-started solver sweep.  ``nested`` records that the curves are
    monotone (nonincreasing) in ``a`` at every alpha.
    """
    amps = [float(x) for x in amplitudes]
    if any(x <= 0 for x in amps):
        raise ValueError("amplitudes must be positive")
    if max(amps) / min(amps) < min_span * (1 - 1e-12):
        raise ValueError(f"amplitudes must span a factor of at least {min_span:g}")
    if run_curve is None:
        from .eigensolver import lambda_curve

        def run_curve(s, al):
            return [(a, r.lam) for a, r in lambda_curve(s, sorted(al, reverse=True))]

    pred = predict(spec)
    q = pred.exponent
    consts, curves = [], []
    for amp in amps:
        s = spec.__class__(spec.p, spec.N, spec.V, spec.W.scaled(amp), 0.0, spec.phi0,
                           spec.discrete_critical)
        cur = run_curve(s, alphas)
        curves.append(cur)
        if spec.regime == "N>p^2":
            consts.append(-fit_linear_limit(cur).constant)
        else:
            consts.append(fixed_exponent_constant(cur, q))
    slope = float(np.polyfit(np.log(amps), np.log(consts), 1)[0])
    order = np.argsort(amps)
    lam = np.array([[y for _, y in sorted(curves[i])] for i in order])
    nested = bool(np.all(np.diff(lam, axis=0) <= 1e-14))
    return WScaling(amps, consts, slope, q, nested, curves)
