"""Grid refinement study: lambda on uniform grids with halving spacing.

    python3 scripts/grid_convergence.py [--alpha 0.25 --R 150]
"""

import argparse

from weakcoupling import bump_perturbation, glued_power_profile, potential_from_profile
from weakcoupling.eigensolver import solve_ground_state
from weakcoupling.energy import ProblemSpec
from weakcoupling.radial import make_grid


def main():
    ap = argparse.ArgumentParser(description="grid refinement")
    ap.add_argument("--p", type=float, default=2.0)
    ap.add_argument("--N", type=int, default=3)
    ap.add_argument("--alpha", type=float, default=0.25)
    ap.add_argument("--R", type=float, default=150.0)
    ap.add_argument("--M0", type=int, default=1500)
    ap.add_argument("--levels", type=int, default=4)
    args = ap.parse_args()
    phi = glued_power_profile(args.p, args.N, 2.0)
    spec = ProblemSpec(args.p, args.N, potential_from_profile(phi), bump_perturbation(1.0, 1.0),
                       args.alpha, phi0=phi)
    prev = diff = None
    for k in range(args.levels):
        M = args.M0 * 2**k
        lam = solve_ground_state(spec, make_grid(args.N, args.R, M)).lam
        line = f"M={M:7d} h={args.R / M:.3e} lambda={lam:.12e}"
        if prev is not None:
            d = prev - lam
            line += f" change={d:.3e}"
            if diff:
                line += f" ratio={diff / d:.2f}"
            diff = d
        print(line)
        prev = lam


if __name__ == "__main__":
    main()
