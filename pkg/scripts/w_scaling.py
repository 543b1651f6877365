"""Dependence of the fitted constant on the amplitude of W.

For ``W -> a W`` the constant should scale like ``a^q`` with ``q = p(p-1)/(N-p)``
below ``N = p^2`` and linearly above it.

    python3 scripts/w_scaling.py
"""

import argparse

from weakcoupling import bump_perturbation, glued_power_profile, potential_from_profile, smooth_tail_profile
from weakcoupling.asymptotics import check_W_scaling
from weakcoupling.energy import ProblemSpec


def spec_for(p, N, kind):
    phi = smooth_tail_profile(p, N) if kind == "smooth" else glued_power_profile(p, N, 2.0)
    return ProblemSpec(p, N, potential_from_profile(phi), bump_perturbation(1.0, 1.0), phi0=phi)


def main():
    ap = argparse.ArgumentParser(description="W amplitude scaling")
    ap.add_argument("--amplitudes", default="0.5,1,2,4")
    ap.add_argument("--kmin", type=int, default=4)
    ap.add_argument("--kmax", type=int, default=8)
    args = ap.parse_args()
    amps = [float(x) for x in args.amplitudes.split(",")]
    alphas = [2.0**-k for k in range(args.kmin, args.kmax + 1)]
    for p, N, kind in [(2.0, 3, "glued"), (2.0, 5, "smooth"), (3.0, 7, "glued")]:
        out = check_W_scaling(spec_for(p, N, kind), amps, alphas)
        consts = ", ".join(f"{a:g}:{c:.4e}" for a, c in zip(out.amplitudes, out.constants))
        print(f"p={p:g} N={N}: slope {out.slope:.4f} (predicted {out.predicted:g}), nested {out.nested}")
        print(f"    constants {consts}")


if __name__ == "__main__":
    main()
