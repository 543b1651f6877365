"""Run the sweep and fit for every shipped regime config and print one line each.

    python3 scripts/run_regimes.py [--out out] [--jobs 1]
"""

import argparse
import json
from pathlib import Path

from weakcoupling import cli

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ["p2_n3", "p2_n4", "p2_n5", "p3_n7", "p3_n2"]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="out")
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    print(f"{'config':8s} {'regime':9s} {'model':14s} {'exponent':>9s} {'constant':>12s} {'r2':>9s}  pass")
    for name in CONFIGS:
        out = Path(args.out) / name
        code = cli.main(["sweep", "--config", str(ROOT / "configs" / f"{name}.ini"), "--out", str(out),
                         "--jobs", str(args.jobs)])
        fit = out / "fit.json"
        if not fit.exists():
            print(f"{name:8s} failed with exit code {code}")
            continue
        rec = json.loads(fit.read_text())
        print(f"{name:8s} {rec['regime']:9s} {rec['model']:14s} {rec['exponent']:9.4f} "
              f"{rec['constant']:12.5e} {rec['r2']:9.6f}  {rec['pass']}")


if __name__ == "__main__":
    main()
