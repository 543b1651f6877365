"""Command-line front end.

    weakcoupling <command> --config FILE [--out DIR] [--jobs N] [--seed S] [--alpha A] [--timestamps]

Commands: make-potential, ground-state, sweep, fit, verify-bounds,
criticality-check.  Configs are INI files; every emitted file starts with a
provenance header (config hash, package version, seed).

Exit codes: 0 success, 2 configuration or usage error, 3 solver failure,
4 checks ran but some failed, 130 interrupted (rows already written are kept).
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .asymptotics import UnsupportedRegime, fit_log_corrected, fit_power, fit_for_regime, predict
from .bounds import (CapacityProblem, capacity_value, incomplete_gamma_zero, residual_threshold,
                     smallest_beta, supersolution_residual, v_alpha, v_alpha_beta, w_alpha, EULER_GAMMA)
from .eigensolver import (SolverConfig, SolverFailure, SpectralResult, auto_radius, default_grid,
                          is_concave, lambda_curve, solve_ground_state, solve_with_domain_extrapolation)
from .energy import ProblemSpec
from .potentials import (ZERO, bump_perturbation, check_condition, glued_power_profile,
                         potential_from_profile, read_potential, smooth_tail_profile, step_well,
                         tabulated_potential, write_potential)
from .radial import geometric_grid, make_grid

log = logging.getLogger("weakcoupling")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_CHECKS, EXIT_INTERRUPTED = 0, 2, 3, 4, 130
# predicted exponents above this put lambda below solver resolution at desk scale
STEEP_EXPONENT = 3.0

SWEEP_COLUMNS = ["alpha", "lambda", "residual", "iterations", "R_max", "converged",
                 "mass", "kinetic", "potential_V", "potential_W"]
CHECK_COLUMNS = ["check_name", "p", "N", "alpha", "parameter", "value", "threshold", "pass"]


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------- config

_NONE = object()

SCHEMA: Dict[str, Dict[str, tuple]] = {
    "problem": {"p": (float, _NONE), "N": (int, _NONE), "V": (str, "glued"), "R0": (float, 2.0),
                "V_file": (str, None)},
    "W": {"shape": (str, "bump"), "radius": (float, 1.0), "amplitude": (float, 1.0),
          "width": (float, 2e-3)},
    "grid": {"grading": (str, "geometric"), "h_min": (float, 5e-3), "ratio": (float, 1.005),
             "cells_per_R": (float, 2000.0), "M": (int, 4000), "R_min": (float, 100.0),
             "R_cap": (float, 1e7), "R_schedule": ("floats", None)},
    "solver": {"method": (str, "shooting"), "max_iterations": (int, 20000), "step_init": (float, 1.0),
               "tolerance_residual": (float, 1e-6), "tolerance_lambda": (float, 1e-8),
               "backtracking": (float, 0.5), "seed": (int, 0)},
    "sweep": {"alphas": ("floats", None), "alpha_max": (float, None), "alpha_min": (float, None),
              "factor": (float, 2.0), "allow_steep": (bool, False)},
    "fit": {"model": (str, "auto"), "exponent_tolerance": (float, 0.15),
            "exponent_rel_tolerance": (float, None), "r2_min": (float, 0.98),
            "spread_max": (float, 0.25), "constant_tolerance": (float, 0.10)},
    "bounds": {"pairs": (str, None), "lambdas": ("floats", [-1e-2, -1e-3]), "R": (float, 1.0),
               "samples": (int, 2000), "capacity_radii": ("floats", [2.0, 4.0, 8.0]),
               "capacity_pairs": (str, "2:3, 2:5, 3:7"), "residual_tol": (float, 1e-10),
               "discrepancy_tol": (float, 1e-8), "capacity_tol": (float, 1e-3)},
    "criticality": {"R": (float, 2000.0), "tolerance": (float, 1e-5), "concavity_tol": (float, 1e-6)},
    "outputs": {"directory": (str, "out"), "svg": (bool, False), "table_r_max": (float, 50.0),
                "table_samples": (int, 2001)},
}


def _convert(kind, raw: str, where: str):
    try:
        if kind == "floats":
            return [float(x) for x in raw.replace(";", ",").split(",") if x.strip()]
        if kind is bool:
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind is int:
            f = float(raw)
            if f != int(f):
                raise ValueError(raw)
            return int(f)
        return kind(raw.strip())
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {raw!r}") from None


@dataclass
class ExperimentConfig:
    sections: Dict[str, Dict[str, object]]
    text: str
    present: set = field(default_factory=set)

    def __getitem__(self, section):
        return self.sections[section]

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.text.encode()).hexdigest()

    def has(self, section: str) -> bool:
        return section in self.present

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"unparseable config: {exc}") from None
        out, present = {}, set()
        for sec in parser.sections():
            if sec not in SCHEMA:
                raise ConfigError(f"unknown section [{sec}]")
            present.add(sec)
            for key in parser[sec]:
                if key not in SCHEMA[sec]:
                    raise ConfigError(f"unknown key '{key}' in [{sec}]")
        for sec, keys in SCHEMA.items():
            vals = {}
            for key, (kind, default) in keys.items():
                if parser.has_option(sec, key):
                    vals[key] = _convert(kind, parser[sec][key], f"[{sec}] {key}")
                elif default is _NONE:
                    raise ConfigError(f"missing required key '{key}' in [{sec}]")
                else:
                    vals[key] = default
            out[sec] = vals
        return cls(out, text, present)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        return cls.from_text(text)

    def alphas(self) -> List[float]:
        s = self["sweep"]
        if s["alphas"]:
            vals = s["alphas"]
        elif s["alpha_max"] is not None and s["alpha_min"] is not None:
            if not (s["alpha_max"] > 0 and s["alpha_min"] > 0 and s["factor"] > 1):
                raise ConfigError("[sweep] needs positive alpha range and factor > 1")
            vals, a = [], s["alpha_max"]
            while a >= s["alpha_min"] * (1 - 1e-12):
                vals.append(a)
                a /= s["factor"]
        else:
            raise ConfigError("[sweep] needs 'alphas' or 'alpha_max' and 'alpha_min'")
        if any(a <= 0 for a in vals):
            raise ConfigError("[sweep] alphas must be positive")
        return sorted(set(vals), reverse=True)


def _W_from(cfg: ExperimentConfig):
    w = cfg["W"]
    if w["shape"] == "bump":
        return bump_perturbation(w["radius"], w["amplitude"])
    if w["shape"] == "well":
        return step_well(w["radius"], w["width"], w["amplitude"])
    raise ConfigError(f"[W] unknown shape {w['shape']!r} (bump, well)")


def build_problem(cfg: ExperimentConfig) -> ProblemSpec:
    pr = cfg["problem"]
    p, N = pr["p"], pr["N"]
    kind = pr["V"]
    try:
        W = _W_from(cfg)
        if kind == "zero":
            return ProblemSpec(p, N, ZERO, W)
        if kind in ("smooth_tail", "glued"):
            if p >= N:
                raise ConfigError(f"[problem] p={p}, N={N} has regime N<=p where V must be zero "
                                  f"(got V={kind}); the invariant 'p >= N requires V == 0' is violated")
            phi = smooth_tail_profile(p, N) if kind == "smooth_tail" else glued_power_profile(p, N, pr["R0"])
            return ProblemSpec(p, N, potential_from_profile(phi), W, phi0=phi)
        if kind == "file":
            if not pr["V_file"]:
                raise ConfigError("[problem] V=file needs V_file")
            r, vals, fp, fN = read_potential(pr["V_file"])
            if fp != p or fN != N:
                raise ConfigError(f"potential file is for p={fp}, N={fN}, config has p={p}, N={N}")
            return ProblemSpec(p, N, tabulated_potential(r, vals, "file"), W)
    except ConfigError:
        raise
    except (ValueError, OSError) as exc:
        raise ConfigError(str(exc)) from None
    raise ConfigError(f"[problem] unknown V source {kind!r} (smooth_tail, glued, file, zero)")


def build_solver(cfg: ExperimentConfig, seed: Optional[int]) -> SolverConfig:
    s = dict(cfg["solver"])
    if seed is not None:
        s["seed"] = seed
    try:
        return SolverConfig(**s)
    except ValueError as exc:
        raise ConfigError(f"[solver] {exc}") from None


def grid_factory(cfg: ExperimentConfig):
    g = cfg["grid"]
    if g["grading"] == "geometric":
        h_min, ratio, cells = g["h_min"], g["ratio"], g["cells_per_R"]
        if not (h_min > 0 and 1 < ratio <= 1.2 and cells >= 16):
            raise ConfigError("[grid] needs h_min > 0, ratio in (1, 1.2], cells_per_R >= 16")
        return _GeometricFactory(h_min, ratio, cells)
    if g["grading"] == "uniform":
        return _UniformFactory(g["M"])
    raise ConfigError(f"[grid] unknown grading {g['grading']!r}")


def validate(cfg: ExperimentConfig) -> ProblemSpec:
    """Build every block once so a bad config fails before any work starts."""
    spec = build_problem(cfg)
    build_solver(cfg, None)
    grid_factory(cfg)
    if cfg.has("sweep"):
        cfg.alphas()
    return spec


@dataclass(frozen=True)
class _GeometricFactory:
    h_min: float
    ratio: float
    cells: float

    def __call__(self, N, R):
        if (self.h_min, self.ratio, self.cells) == (5e-3, 1.005, 2000.0):
            return default_grid(N, R)
        return geometric_grid(N, R, self.h_min, self.ratio, h_max=max(R / self.cells, 0.05))


@dataclass(frozen=True)
class _UniformFactory:
    M: int

    def __call__(self, N, R):
        return make_grid(N, R, self.M)


# ---------------------------------------------------------------- output

@dataclass
class Provenance:
    config_sha256: str
    version: str
    seed: int
    timestamp: Optional[str] = None

    def lines(self) -> List[str]:
        out = [f"config_sha256={self.config_sha256}", f"version={self.version}", f"seed={self.seed}"]
        if self.timestamp:
            out.append(f"timestamp={self.timestamp}")
        return out

    def as_dict(self) -> dict:
        d = {"config_sha256": self.config_sha256, "version": self.version, "seed": self.seed}
        if self.timestamp:
            d["timestamp"] = self.timestamp
        return d


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


class CsvSink:
    """CSV file with a ``#`` provenance preamble; rows are flushed and synced one by one."""

    def __init__(self, path: Path, columns: Sequence[str], prov: Provenance):
        self.path = Path(path)
        self.columns = list(columns)
        self.prov = prov
        with open(self.path, "w", newline="") as fh:
            for ln in prov.lines():
                fh.write(f"# {ln}\n")
            csv.writer(fh).writerow(self.columns)
            fh.flush()
            os.fsync(fh.fileno())

    def append(self, row: dict):
        with open(self.path, "a", newline="") as fh:
            csv.writer(fh).writerow([_fmt(row[c]) for c in self.columns])
            fh.flush()
            os.fsync(fh.fileno())

    def rewrite(self, rows: Sequence[dict]):
        """Atomically replace the body with ``rows`` (used to sort after a parallel sweep)."""
        tmp = self.path.with_suffix(self.path.suffix + ".tmp")
        with open(tmp, "w", newline="") as fh:
            for ln in self.prov.lines():
                fh.write(f"# {ln}\n")
            w = csv.writer(fh)
            w.writerow(self.columns)
            for row in rows:
                w.writerow([_fmt(row[c]) for c in self.columns])
        os.replace(tmp, self.path)


def read_csv_rows(path) -> List[dict]:
    with open(path, newline="") as fh:
        body = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("".join(body))))


def write_json(path: Path, record: dict, prov: Provenance):
    rec = dict(record)
    rec["provenance"] = prov.as_dict()
    Path(path).write_text(json.dumps(rec, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def write_plot_text(path: Path, rows: Sequence[dict], prov: Provenance):
    lines = [f"# {ln}" for ln in prov.lines()] + ["# log_alpha log_minus_lambda"]
    for r in rows:
        if float(r["lambda"]) < 0:
            lines.append(f"{math.log(float(r['alpha']))!r} {math.log(-float(r['lambda']))!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_svg(path: Path, rows: Sequence[dict], prov: Provenance, title: str = ""):
    pts = [(math.log(float(r["alpha"])), math.log(-float(r["lambda"]))) for r in rows if float(r["lambda"]) < 0]
    W, H, m = 480, 360, 50
    parts = ['<?xml version="1.0" encoding="UTF-8"?>',
             f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
             "<!-- " + " ".join(prov.lines()) + " -->",
             f'<rect width="{W}" height="{H}" fill="white"/>',
             f'<line x1="{m}" y1="{H - m}" x2="{W - m / 2}" y2="{H - m}" stroke="black"/>',
             f'<line x1="{m}" y1="{H - m}" x2="{m}" y2="{m / 2}" stroke="black"/>',
             f'<text x="{W / 2}" y="{H - 12}" text-anchor="middle" font-size="12">log alpha</text>',
             f'<text x="14" y="{H / 2}" text-anchor="middle" font-size="12" '
             f'transform="rotate(-90 14 {H / 2})">log(-lambda)</text>']
    if title:
        parts.append(f'<text x="{W / 2}" y="18" text-anchor="middle" font-size="13">{title}</text>')
    if len(pts) >= 1:
        xs, ys = zip(*pts)
        x0, x1 = min(xs), max(xs)
        y0, y1 = min(ys), max(ys)
        sx = (W - 1.5 * m) / (x1 - x0 or 1.0)
        sy = (H - 1.5 * m) / (y1 - y0 or 1.0)
        coords = [(m + (x - x0) * sx, H - m - (y - y0) * sy) for x, y in pts]
        parts.append('<polyline fill="none" stroke="steelblue" stroke-width="1.5" points="'
                     + " ".join(f"{x:.2f},{y:.2f}" for x, y in coords) + '"/>')
        parts += [f'<circle cx="{x:.2f}" cy="{y:.2f}" r="3" fill="steelblue"/>' for x, y in coords]
        parts.append(f'<text x="{m}" y="{H - m + 16}" font-size="10">{x0:.2f}</text>')
        parts.append(f'<text x="{W - m}" y="{H - m + 16}" font-size="10">{x1:.2f}</text>')
        parts.append(f'<text x="4" y="{H - m}" font-size="10">{y0:.1f}</text>')
        parts.append(f'<text x="4" y="{m}" font-size="10">{y1:.1f}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")


# ---------------------------------------------------------------- solving

def _solve_one(cfg: ExperimentConfig, spec: ProblemSpec, solver: SolverConfig, alpha: float,
               guess: Optional[float] = None) -> SpectralResult:
    g = cfg["grid"]
    factory = grid_factory(cfg)
    s = spec.with_alpha(alpha)
    if g["R_schedule"]:
        return solve_with_domain_extrapolation(s, solver, g["R_schedule"], factory, guess=guess)
    return auto_radius(s, solver, R_min=g["R_min"], R_cap=g["R_cap"], grid_factory=factory, guess=guess)


def _worker(args):
    text, seed, alpha = args
    cfg = ExperimentConfig.from_text(text)
    spec = build_problem(cfg)
    try:
        return alpha, _solve_one(cfg, spec, build_solver(cfg, seed), alpha).row()
    except SolverFailure as exc:
        return alpha, str(exc)


def run_points(cfg: ExperimentConfig, alphas: Sequence[float], seed: Optional[int], jobs: int,
               on_row) -> Dict[float, object]:
    """Solve at every alpha; ``on_row(alpha, row or error message)`` fires as results arrive.

    With one job the points form a warm-started chain in decreasing alpha; with
    more, every point is solved independently in a process pool.
    """
    spec = build_problem(cfg)
    solver = build_solver(cfg, seed)
    results: Dict[float, object] = {}
    if jobs <= 1:
        if cfg["grid"]["R_schedule"]:
            for a in sorted(alphas, reverse=True):
                try:
                    row = _solve_one(cfg, spec, solver, a).row()
                except SolverFailure as exc:
                    row = str(exc)
                results[a] = row
                on_row(a, row)
            return results

        def cb(a, res):
            row = str(res) if isinstance(res, SolverFailure) else res.row()
            results[a] = row
            on_row(a, row)

        g = cfg["grid"]
        lambda_curve(spec, sorted(alphas, reverse=True), solver, R_min=g["R_min"],
                     grid_factory=grid_factory(cfg), R_cap=g["R_cap"], on_result=cb)
        return results
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        for a, row in pool.map(_worker, [(cfg.text, seed, a) for a in alphas]):
            results[a] = row
            on_row(a, row)
    return results


# ---------------------------------------------------------------- commands

@dataclass
class Context:
    cfg: ExperimentConfig
    out: Path
    prov: Provenance
    jobs: int
    seed: Optional[int]
    alpha: Optional[float]


def cmd_make_potential(ctx: Context) -> int:
    spec = build_problem(ctx.cfg)
    o = ctx.cfg["outputs"]
    r = np.linspace(0.0, o["table_r_max"], o["table_samples"])
    path = ctx.out / "potential.txt"
    try:
        write_potential(path, spec.V, r, spec.p, spec.N, comments=ctx.prov.lines())
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc}") from None
    print(path)
    return EXIT_OK


def cmd_ground_state(ctx: Context) -> int:
    if ctx.alpha is not None:
        if ctx.alpha < 0:
            raise ConfigError("--alpha must be >= 0")
        alphas = [ctx.alpha]
    elif ctx.cfg.has("sweep"):
        alphas = ctx.cfg.alphas()
    else:
        raise ConfigError("ground-state needs --alpha or a [sweep] block")
    sink = CsvSink(ctx.out / "ground_state.csv", SWEEP_COLUMNS, ctx.prov)
    failed = []

    def on_row(a, row):
        if isinstance(row, str):
            failed.append((a, row))
            log.error("solver failure at alpha=%r: %s", a, row)
        else:
            sink.append(row)

    results = run_points(ctx.cfg, alphas, ctx.seed, ctx.jobs, on_row)
    sink.rewrite([results[a] for a in sorted(results) if not isinstance(results[a], str)])
    print(sink.path)
    return EXIT_SOLVER if failed else EXIT_OK


def _fit_record(cfg: ExperimentConfig, spec: ProblemSpec, rows: Sequence[dict]) -> dict:
    curve = [(float(r["alpha"]), float(r["lambda"])) for r in rows]
    f = cfg["fit"]
    try:
        pred = predict(spec)
    except UnsupportedRegime as exc:
        raise ConfigError(str(exc)) from None
    model = f["model"]
    if model == "auto":
        model = {"N=p^2": "log_corrected", "N>p^2": "linear_limit"}.get(spec.regime, "pure_power")
    if model == "pure_power":
        fit = fit_power(curve, spec.regime)
        if f["exponent_rel_tolerance"] is not None:
            ok_q = abs(fit.exponent - pred.exponent) <= f["exponent_rel_tolerance"] * abs(pred.exponent)
        else:
            ok_q = abs(fit.exponent - pred.exponent) <= f["exponent_tolerance"]
        ok = bool(ok_q and fit.r2 >= f["r2_min"] and not fit.flags["regime_violation"])
        extra = {}
    elif model == "log_corrected":
        fit = fit_log_corrected(curve, spec.regime)
        power = fit_power(curve, spec.regime)
        ok = bool(fit.spread < f["spread_max"] and fit.r2 > power.r2 and fit.r2 >= f["r2_min"]
                  and not fit.flags["regime_violation"])
        extra = {"pure_power_r2": power.r2, "pure_power_exponent": power.exponent,
                 "ratio_mean": fit.flags["ratio_mean"], "log_shift": fit.flags["log_shift"]}
    elif model == "linear_limit":
        fit = fit_for_regime(curve, "N>p^2")
        if pred.constant is None:
            ok = False
        else:
            ok = bool(abs(fit.constant - pred.constant) <= f["constant_tolerance"] * abs(pred.constant)
                      and not fit.flags["regime_violation"])
        extra = {"richardson_order": fit.flags["richardson_order"]}
    else:
        raise ConfigError(f"[fit] unknown model {model!r}")
    rec = {"regime": spec.regime, "model": fit.model, "exponent": fit.exponent, "constant": fit.constant,
           "r2": fit.r2, "window": list(fit.window), "samples": fit.samples,
           "predicted_exponent": pred.exponent,
           "predicted_constant": None if pred.constant is None else float(pred.constant),
           "pass": ok, "spread": fit.spread}
    rec.update(extra)
    return rec


def _check_steep(cfg: ExperimentConfig, spec: ProblemSpec):
    try:
        q = predict(spec).exponent
    except UnsupportedRegime as exc:
        raise ConfigError(str(exc)) from None
    if q > STEEP_EXPONENT and not cfg["sweep"]["allow_steep"]:
        raise ConfigError(f"predicted exponent {q:g} exceeds {STEEP_EXPONENT:g}; "
                          "set [sweep] allow_steep = true to run it anyway")


def cmd_sweep(ctx: Context) -> int:
    spec = build_problem(ctx.cfg)
    _check_steep(ctx.cfg, spec)
    alphas = ctx.cfg.alphas()
    sink = CsvSink(ctx.out / "sweep.csv", SWEEP_COLUMNS, ctx.prov)
    failed = []

    def on_row(a, row):
        if isinstance(row, str):
            failed.append(a)
            log.error("solver failure at alpha=%r: %s", a, row)
        else:
            sink.append(row)

    results = run_points(ctx.cfg, alphas, ctx.seed, ctx.jobs, on_row)
    rows = [results[a] for a in sorted(results) if not isinstance(results[a], str)]
    sink.rewrite(rows)
    write_plot_text(ctx.out / "sweep_plot.txt", rows, ctx.prov)
    if ctx.cfg["outputs"]["svg"]:
        write_svg(ctx.out / "sweep.svg", rows, ctx.prov, f"p={spec.p:g}, N={spec.N}")
    if len(rows) < 3:
        log.error("too few successful points to fit")
        return EXIT_SOLVER
    rec = _fit_record(ctx.cfg, spec, rows)
    write_json(ctx.out / "fit.json", rec, ctx.prov)
    print(json.dumps({k: rec[k] for k in ("regime", "model", "exponent", "constant", "pass")},
                     default=_json_default))
    if failed:
        return EXIT_SOLVER
    return EXIT_OK if rec["pass"] else EXIT_CHECKS


def cmd_fit(ctx: Context) -> int:
    spec = build_problem(ctx.cfg)
    path = ctx.out / "sweep.csv"
    if not path.exists():
        raise ConfigError(f"no sweep results at {path}; run 'sweep' first")
    rows = read_csv_rows(path)
    rec = _fit_record(ctx.cfg, spec, rows)
    write_json(ctx.out / "fit.json", rec, ctx.prov)
    print(json.dumps({k: rec[k] for k in ("regime", "model", "exponent", "constant", "pass")},
                     default=_json_default))
    return EXIT_OK if rec["pass"] else EXIT_CHECKS


def _pairs(text: str):
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            p, N = tok.split(":")
            out.append((float(p), int(N)))
        except ValueError:
            raise ConfigError(f"bad (p:N) pair {tok!r}") from None
    return out


def bounds_rows(cfg: ExperimentConfig) -> List[dict]:
    """All closed-form checks: supersolution families, capacity, incomplete gamma."""
    b = cfg["bounds"]
    pr = cfg["problem"]
    pairs = _pairs(b["pairs"]) if b["pairs"] else [(pr["p"], pr["N"])]
    rows = []

    def add(name, p, N, alpha, parameter, value, threshold, ok):
        rows.append({"check_name": name, "p": p, "N": N, "alpha": alpha, "parameter": parameter,
                     "value": value, "threshold": threshold, "pass": bool(ok)})

    for p, N in pairs:
        if not 1 < p < N:
            raise ConfigError(f"supersolution checks need 1 < p < N, got p={p}, N={N}")
        for lam in b["lambdas"]:
            if not lam < 0:
                raise ConfigError("[bounds] lambdas must be negative")
            fams = [("v_alpha", v_alpha(lam, p, N))]
            w = w_alpha(lam, p, N)
            beta = smallest_beta(lam, p, N, b["R"])
            fams.append(("v_alpha_beta", v_alpha_beta(lam, p, N, beta)))
            for name, s in fams:
                r = np.geomspace(b["R"], max(60.0 / s.kappa, 10 * b["R"]), b["samples"])
                res = supersolution_residual(s, lam, r)
                add(f"{name}_residual", p, N, "", f"lambda={lam!r};beta={s.beta!r}",
                    res.max_residual, b["residual_tol"], res.max_residual <= b["residual_tol"])
                add(f"{name}_paths", p, N, "", f"lambda={lam!r}", res.max_discrepancy,
                    b["discrepancy_tol"], res.max_discrepancy <= b["discrepancy_tol"])
            # w_alpha: region beyond the sampled threshold L
            x = np.geomspace(1e-3, 60.0, b["samples"])
            L = residual_threshold(w, lam, x / w.kappa)
            add("w_alpha_threshold", p, N, "", f"lambda={lam!r}", L, "finite", math.isfinite(L))
            if math.isfinite(L):
                lo = max(L / w.kappa, b["R"])
                r = np.geomspace(lo, max(60.0 / w.kappa, 10 * lo), b["samples"])
                res = supersolution_residual(w, lam, r)
                add("w_alpha_residual", p, N, "", f"lambda={lam!r};L={L!r}", res.max_residual,
                    b["residual_tol"], res.max_residual <= b["residual_tol"])
                add("w_alpha_paths", p, N, "", f"lambda={lam!r}", res.max_discrepancy,
                    b["discrepancy_tol"], res.max_discrepancy <= b["discrepancy_tol"])
    for p, N in _pairs(b["capacity_pairs"]):
        for R in b["capacity_radii"]:
            cp = CapacityProblem(p, N, R)
            exact = capacity_value(cp, "closed_form")
            disc = capacity_value(cp, "discrete_min")
            rel = abs(disc - exact) / exact
            add("capacity", p, N, "", f"R={R!r}", rel, b["capacity_tol"], rel <= b["capacity_tol"])
        Rs = [1e3, 1e4, 1e5]
        vals = [capacity_value(CapacityProblem(p, N, R), "discrete_min") for R in Rs]
        slope = float(np.polyfit(np.log(Rs), np.log(vals), 1)[0])
        target = -CapacityProblem(p, N, 2.0).nu * (p - 1)
        add("capacity_decay_slope", p, N, "", f"target={target!r}", slope, 0.05, abs(slope - target) <= 0.05)
    x = 0.01
    dev = abs(incomplete_gamma_zero(x) + math.log(x) + EULER_GAMMA)
    add("gamma0_small_x", "", "", "", f"x={x!r}", dev, 0.02, dev < 0.02)
    gap = abs(incomplete_gamma_zero(1.0, "series") - incomplete_gamma_zero(1.0, "fraction"))
    add("gamma0_branch_agreement", "", "", "", "x=1.0", gap, 1e-10, gap <= 1e-10)
    return rows


def cmd_verify_bounds(ctx: Context) -> int:
    rows = bounds_rows(ctx.cfg)
    sink = CsvSink(ctx.out / "bounds.csv", CHECK_COLUMNS, ctx.prov)
    sink.rewrite(rows)
    bad = [r for r in rows if not r["pass"]]
    for r in bad:
        log.error("check failed: %s %s", r["check_name"], r["parameter"])
    print(sink.path)
    return EXIT_CHECKS if bad else EXIT_OK


def cmd_criticality_check(ctx: Context) -> int:
    cfg = ctx.cfg
    spec = build_problem(cfg)
    c = cfg["criticality"]
    solver = build_solver(cfg, ctx.seed)
    p, N = spec.p, spec.N
    rows = []

    def add(name, alpha, parameter, value, threshold, ok):
        rows.append({"check_name": name, "p": p, "N": N, "alpha": alpha, "parameter": parameter,
                     "value": value, "threshold": threshold, "pass": bool(ok)})

    factory = grid_factory(cfg)
    grid = factory(N, c["R"])
    lam0 = solve_ground_state(spec.with_alpha(0.0), grid, solver).lam
    add("lambda_at_zero", 0.0, f"R={c['R']!r}", lam0, c["tolerance"], abs(lam0) <= c["tolerance"])
    if spec.phi0 is not None:
        omega = check_condition(spec.W, spec.phi0, grid, p)
    else:
        omega = float(np.dot(grid.weights, spec.W(grid.nodes)))
    add("condition_sign", "", "int W phi0^p", omega, 0.0, True)
    if cfg.has("sweep"):
        alphas = cfg.alphas()
        res = {}

        def on_row(a, row):
            res[a] = row

        run_points(cfg, alphas, ctx.seed, ctx.jobs, on_row)
        failed = [a for a in alphas if isinstance(res[a], str)]
        if failed:
            for a in failed:
                log.error("solver failure at alpha=%r: %s", a, res[a])
            return EXIT_SOLVER
        good = sorted(alphas)
        lams = [res[a]["lambda"] for a in good]
        if omega > 0:
            for a, l in zip(good, lams):
                add("negative_lambda", a, "", l, 0.0, l < 0)
        else:
            for a, l in zip(good[:2], lams[:2]):
                add("zero_lambda", a, "", l, c["tolerance"], abs(l) <= c["tolerance"])
        slopes = np.diff(lams) / np.diff(good)
        tol = c["concavity_tol"] * float(np.max(np.abs(slopes))) if slopes.size else 0.0
        worst = float(np.max(np.diff(slopes))) if slopes.size > 1 else 0.0
        add("concavity", "", "max slope increase", worst, tol, is_concave(good, lams, tol))
    sink = CsvSink(ctx.out / "criticality.csv", CHECK_COLUMNS, ctx.prov)
    sink.rewrite(rows)
    print(sink.path)
    return EXIT_OK if all(r["pass"] for r in rows) else EXIT_CHECKS


COMMANDS = {
    "make-potential": cmd_make_potential,
    "ground-state": cmd_ground_state,
    "sweep": cmd_sweep,
    "fit": cmd_fit,
    "verify-bounds": cmd_verify_bounds,
    "criticality-check": cmd_criticality_check,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="weakcoupling", description=__doc__.split("\n\n")[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="INI experiment configuration")
    ap.add_argument("--jobs", type=int, default=1, help="worker processes for independent alpha points")
    ap.add_argument("--seed", type=int, default=None, help="overrides [solver] seed")
    ap.add_argument("--out", default=None, help="output directory (default: [outputs] directory)")
    ap.add_argument("--alpha", type=float, default=None, help="single coupling for ground-state")
    ap.add_argument("--timestamps", action="store_true", help="add a UTC timestamp to provenance headers")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        cfg = ExperimentConfig.load(args.config)
        validate(cfg)
        out = Path(args.out if args.out is not None else cfg["outputs"]["directory"])
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"cannot create output directory {out}: {exc}") from None
        seed = args.seed if args.seed is not None else cfg["solver"]["seed"]
        stamp = datetime.now(timezone.utc).isoformat(timespec="seconds") if args.timestamps else None
        ctx = Context(cfg, out, Provenance(cfg.sha256, __version__, seed, stamp), args.jobs, args.seed, args.alpha)
        return COMMANDS[args.command](ctx)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except KeyboardInterrupt:
        print("interrupted; completed rows were kept", file=sys.stderr)
        return EXIT_INTERRUPTED


if __name__ == "__main__":
    sys.exit(main())
