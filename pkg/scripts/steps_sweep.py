"""Quality against the number of sampler steps for a trained two-arcs model.

Also runs the exact-predictor sweep, whose error must stay flat at rounding level.
"""

import argparse
import csv
from pathlib import Path

import numpy as np

from flowpaths.model import TrainConfig, train
from flowpaths.oracle import ExactPredictor, ToyDataset
from flowpaths.paths import PathFamily, PathSpec
from flowpaths.sampler import InferenceConfig, solve_ode


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--kind", default="fm", choices=["dp", "fm"])
    ap.add_argument("--c", type=float, default=0.1)
    ap.add_argument("--train-steps", type=int, default=6000)
    ap.add_argument("--grid", type=int, nargs="+", default=[1, 2, 5, 10, 20, 30, 50])
    ap.add_argument("--out", default="runs/steps_sweep")
    args = ap.parse_args()

    spec = PathSpec(PathFamily.ICFM, c=args.c)
    ds = ToyDataset("two-arcs-2d", seed=1)
    model, _ = train(TrainConfig(spec, args.kind, steps=args.train_steps, batch_size=128, seed=1), ds.draw, data_dim=2)
    ev = ds.sample(2000, offset=1_000_003)
    exact = ExactPredictor(ev.x0, args.kind)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n_steps", "mse_model", "mse_exact"])
        for n in args.grid:
            cfg = InferenceConfig(spec, args.kind, n)
            mse = np.mean(np.sum((solve_ode(model, ev.y, cfg) - ev.x0) ** 2, axis=1))
            mse_exact = np.mean(np.sum((solve_ode(exact, ev.y, cfg) - ev.x0) ** 2, axis=1))
            w.writerow([n, f"{mse:.17g}", f"{mse_exact:.17g}"])
            print(f"N={n:<3} model MSE {mse:.5f}  exact {mse_exact:.1e}")


if __name__ == "__main__":
    main()
