"""Solver eigenvalues against the trial-function upper bound and the mass growth law.

    python3 scripts/bounds_report.py [--p 2 --N 3]
"""

import argparse

import numpy as np

from weakcoupling import bump_perturbation, glued_power_profile, potential_from_profile
from weakcoupling.bounds import dominance_constant, lower_bound_mass, optimize_upper_bound, v_alpha
from weakcoupling.eigensolver import SolverConfig, lambda_curve
from weakcoupling.energy import ProblemSpec


def main():
    ap = argparse.ArgumentParser(description="upper bounds and mass growth")
    ap.add_argument("--p", type=float, default=2.0)
    ap.add_argument("--N", type=int, default=3)
    ap.add_argument("--kmin", type=int, default=2)
    ap.add_argument("--kmax", type=int, default=8)
    args = ap.parse_args()
    p, N = args.p, args.N
    phi = glued_power_profile(p, N, 2.0)
    spec = ProblemSpec(p, N, potential_from_profile(phi), bump_perturbation(1.0, 1.0), phi0=phi)
    alphas = [2.0**-k for k in range(args.kmin, args.kmax + 1)]
    curve = lambda_curve(spec, alphas, SolverConfig())
    print(f"{'alpha':>10s} {'lambda':>12s} {'bound':>12s} {'t*':>8s} {'mass':>10s} {'mass/law':>9s} {'C_dom':>9s}")
    for a, r in curve:
        ub = optimize_upper_bound(spec.with_alpha(a))
        growth = lower_bound_mass(r.lam, p, N)
        C, ratio = dominance_constant(r.eigenfunction, v_alpha(r.lam, p, N), 2.0)
        t = "phi0" if ub.t is None else f"{ub.t:.4f}"
        print(f"{a:10.3e} {r.lam:12.5e} {ub.bound:12.5e} {t:>8s} {r.mass:10.4e} "
              f"{r.mass / growth.value:9.4f} {C:9.3e}{'' if ratio >= 1 - 1e-9 else ' (not dominated)'}")
    lam = np.array([r.lam for _, r in curve])
    mass = np.array([r.mass for _, r in curve])
    print(f"mass slope in log(-lambda): {np.polyfit(np.log(-lam), np.log(mass), 1)[0]:.4f}")


if __name__ == "__main__":
    main()
