"""Enhance the two-arcs toy with every path family and report MSE and energy distance."""

import argparse

import numpy as np

from flowpaths.model import TrainConfig, train
from flowpaths.oracle import ToyDataset, energy_distance
from flowpaths.paths import REFERENCE_SPECS, PathFamily
from flowpaths.sampler import InferenceConfig, solve_ode


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=6000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--n-eval", type=int, default=2000)
    ap.add_argument("--ode-steps", type=int, default=50)
    args = ap.parse_args()

    ds = ToyDataset("two-arcs-2d", seed=args.seed)
    ev = ds.sample(args.n_eval, offset=1_000_003)
    noisy = np.mean(np.sum((ev.y - ev.x0) ** 2, axis=1))
    print(f"noisy: MSE {noisy:.4f}, energy distance {energy_distance(ev.y, ev.x0):.4f}")
    runs = [(spec, "dp") for spec in REFERENCE_SPECS]
    runs.append((REFERENCE_SPECS[-1], "fm"))
    for spec, kind in runs:
        cfg = TrainConfig(spec, kind, steps=args.steps, batch_size=128, seed=args.seed)
        model, _ = train(cfg, ds.draw, data_dim=2)
        out = solve_ode(model, ev.y, InferenceConfig(spec, kind, args.ode_steps))
        mse = np.mean(np.sum((out - ev.x0) ** 2, axis=1))
        label = f"{spec.family.value}-{kind}" + ("" if spec.family is PathFamily.ICFM else f" k={spec.k:g}")
        print(f"{label:<18} c={spec.c:<5g} MSE {mse:.4f} ({100 * (1 - mse / noisy):.1f}% reduction), "
              f"energy distance {energy_distance(out, ev.x0):.4f}")


if __name__ == "__main__":
    main()
