"""Mean weight beta(t) and path variance for the reference configurations.

Writes one CSV per configuration plus a summary of how far each beta curve
bends away from the straight line beta = t.
"""

import argparse
from pathlib import Path

import numpy as np

from flowpaths.paths import (REFERENCE_SPECS, PathFamily, PathSpec, path_weights, schedule_curve,
                             write_schedule_csv)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs/path_curves")
    ap.add_argument("--points", type=int, default=1001)
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    specs = list(REFERENCE_SPECS) + [PathSpec(PathFamily.SB_VE, 0.99, 0.4)]
    grid = np.linspace(0.0, 1.0, args.points)
    print(f"{'path':<8} {'k':>5} {'c':>6} {'max|beta-t|':>12} {'max var':>9}")
    for spec in specs:
        _, beta, var = path_weights(spec, grid)
        name = f"{spec.family.value}_k{spec.k:g}_c{spec.c:g}.csv"
        write_schedule_csv(schedule_curve(spec, args.points), out / name)
        print(f"{spec.family.value:<8} {spec.k:>5g} {spec.c:>6g} {np.max(np.abs(beta - grid)):>12.5f} {var.max():>9.4f}")


if __name__ == "__main__":
    main()
