"""Train a predictor on the 1-D Gaussian world and compare it with the MMSE floor.

The floor is E[x0 | y], available in closed form. Prints the one-step (DDP) and
ODE errors of the trained network next to those of the exact posterior-mean oracle.
"""

import argparse
import time

import numpy as np

from flowpaths.model import TrainConfig, train
from flowpaths.oracle import PosteriorMeanPredictor, ToyDataset, conditional_mean_x0_given_y, sample_pairs
from flowpaths.paths import PathFamily, PathSpec
from flowpaths.sampler import InferenceConfig, InferenceMode, enhance


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--family", default="icfm", choices=[f.value for f in PathFamily])
    ap.add_argument("--k", type=float, default=2.6)
    ap.add_argument("--c", type=float, default=0.1)
    ap.add_argument("--steps", type=int, default=8000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--n-eval", type=int, default=100000)
    args = ap.parse_args()

    spec = PathSpec(PathFamily(args.family), args.k, args.c)
    ds = ToyDataset("gaussian-world", seed=args.seed)
    start = time.perf_counter()
    model, trace = train(TrainConfig(spec, "dp", steps=args.steps, seed=args.seed), ds.draw, data_dim=1)
    print(f"trained {args.steps} steps in {time.perf_counter() - start:.1f} s, final loss {trace[-200:].mean():.4f}")

    world = ds.world()
    batch = sample_pairs(world, np.random.default_rng(args.seed + 1), args.n_eval)
    floor = np.mean((conditional_mean_x0_given_y(world, batch.y) - batch.x0) ** 2)
    print(f"noisy input MSE {np.mean((batch.y - batch.x0) ** 2):.4f}, MMSE floor {floor:.4f}")
    oracle = PosteriorMeanPredictor(world, spec)
    modes = [("ode-50", InferenceMode.ODE, 50)]
    if spec.family is PathFamily.ICFM:
        modes.insert(0, ("ddp", InferenceMode.DDP, 1))
    for label, mode, n in modes:
        cfg = InferenceConfig(spec, "dp", n, mode)
        for who, pred in (("model", model), ("oracle", oracle)):
            mse = np.mean((enhance(pred, batch.y, cfg) - batch.x0) ** 2)
            print(f"{label:<7} {who:<7} MSE {mse:.4f} ({100 * (mse / floor - 1):+.2f}% over floor)")


if __name__ == "__main__":
    main()
