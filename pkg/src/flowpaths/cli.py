"""Command-line entry point: ``flowpaths <command> [--config F] [--seed S] [--out D]``."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import audio
from .checks import gradcheck_suite, oracle_suite
from .config import ConfigError, RunConfig, dump_config, load_config
from .model import CheckpointFormatError, TrainingDivergedError, load_checkpoint, save_checkpoint, train
from .oracle import (ExactPredictor, PosteriorMeanPredictor, ToyDataset, read_pairs_csv,
                     write_pairs_csv)
from .paths import PairedBatch, fmt, schedule_curve, write_schedule_csv
from .sampler import InferenceMode, LossKind, NonFiniteStateError, enhance

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INVARIANT = 3
EXIT_IO = 4

EVAL_OFFSET = 1_000_003  # seed offset separating evaluation data from training data


class InvariantFailure(RuntimeError):
    pass


# --- data ------------------------------------------------------------------


def toy_dataset(cfg: RunConfig) -> ToyDataset:
    d = cfg.data
    return ToyDataset(d.generator, {"noise_var": d.noise_var, "shift": tuple(d.shift),
                                    "noise_std": d.noise_std, "jitter": d.jitter}, cfg.seed)


def audio_clips(cfg: RunConfig, n: int, offset: int):
    rng = np.random.default_rng(cfg.seed + offset)
    return [audio.synth_pair(cfg.audio.synth(cfg.seed + offset), rng) for _ in range(n)]


def clips_to_frames(cfg: RunConfig, clips) -> PairedBatch:
    a = cfg.audio
    x0, y = [], []
    for clean, noisy in clips:
        x0.append(audio.stft(clean, a.window, a.hop).to_real() * a.scale)
        y.append(audio.stft(noisy, a.window, a.hop).to_real() * a.scale)
    return PairedBatch(np.concatenate(x0), np.concatenate(y), complex_valued=True)


def training_data(cfg: RunConfig):
    """Returns ``(source, data_dim)`` where source is a pool or a fresh-pair callable."""
    if cfg.data.generator == "audio-frames":
        pool = clips_to_frames(cfg, audio_clips(cfg, cfg.data.n_clips, 0))
        return pool, pool.dim
    ds = toy_dataset(cfg)
    if cfg.data.n_train > 0:
        return ds.sample(cfg.data.n_train), ds.dim
    return ds.draw, ds.dim


def eval_data(cfg: RunConfig) -> PairedBatch:
    return toy_dataset(cfg).sample(cfg.data.n_eval, offset=EVAL_OFFSET)


def enhance_waveform(model, cfg: RunConfig, noisy: audio.Waveform, inf_cfg) -> audio.Waveform:
    a = cfg.audio
    spec = audio.stft(noisy, a.window, a.hop)
    est = enhance(model, spec.to_real() * a.scale, inf_cfg) / a.scale
    return audio.istft(spec.with_values(audio.real_to_complex(est)))


def _mse_rows(est, x0) -> np.ndarray:
    return np.sum((est - x0) ** 2, axis=1)


# --- commands ----------------------------------------------------------------


def cmd_schedule(cfg: RunConfig, args) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_schedule_csv(schedule_curve(cfg.path_spec(), cfg.schedule.n_points), out / "schedule.csv")
    print(f"wrote {out / 'schedule.csv'}")
    return EXIT_OK


def cmd_data(cfg: RunConfig, args) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.data.generator == "audio-frames":
        raise ConfigError("data dumps are available for toy generators only")
    write_pairs_csv(eval_data(cfg), out / "pairs.csv")
    print(f"wrote {out / 'pairs.csv'}")
    return EXIT_OK


def cmd_train(cfg: RunConfig, args) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    source, dim = training_data(cfg)
    model, trace = train(cfg.train_config(), source, data_dim=dim, log_every=cfg.train.log_every)
    save_checkpoint(model, out / "checkpoint.fpk")
    with open(out / "loss_trace.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "loss"])
        for i, v in enumerate(trace):
            w.writerow([i, fmt(v)])
    (out / "config.toml").write_text(dump_config(cfg))
    tail = float(np.mean(trace[-100:])) if len(trace) else float("nan")
    print(f"wrote {out / 'checkpoint.fpk'} ({model.n_params} parameters, final loss {tail:.6f})")
    return EXIT_OK


def _load_model(cfg: RunConfig, args):
    ckpt = Path(args.checkpoint) if args.checkpoint else Path(cfg.out) / "checkpoint.fpk"
    model = load_checkpoint(ckpt)
    if model.loss_kind is not LossKind(cfg.train.loss_kind):
        raise ConfigError(f"checkpoint predicts {model.loss_kind.value}, config says {cfg.train.loss_kind}")
    if model.path is not None and model.path != cfg.path_spec():
        raise ConfigError(f"checkpoint was trained on {model.path.to_dict()}, config has {cfg.path_spec().to_dict()}")
    return model


def cmd_enhance(cfg: RunConfig, args) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    model = _load_model(cfg, args)
    inf = cfg.inference_config()
    metrics: dict = {"mode": inf.mode.value, "n_steps": inf.n_steps if inf.mode is InferenceMode.ODE else 1}

    if args.input and args.input.endswith(".wav"):
        noisy = audio.read_wav(args.input)
        est = enhance_waveform(model, cfg, noisy, inf)
        audio.write_wav(out / "enhanced.wav", est)
        if args.reference:
            ref = audio.read_wav(args.reference)
            metrics["si_sdr"] = audio.si_sdr(est, ref)
            metrics["si_sdr_noisy"] = audio.si_sdr(noisy, ref)
    elif cfg.data.generator == "audio-frames":
        items = []
        for i, (clean, noisy) in enumerate(audio_clips(cfg, cfg.data.n_eval_clips, EVAL_OFFSET)):
            est = enhance_waveform(model, cfg, noisy, inf)
            items.append({"si_sdr": audio.si_sdr(est, clean), "si_sdr_noisy": audio.si_sdr(noisy, clean)})
            if i == 0:
                audio.write_wav(out / "clean.wav", clean)
                audio.write_wav(out / "noisy.wav", noisy)
                audio.write_wav(out / "enhanced.wav", est)
        metrics["items"] = items
        metrics["si_sdr"] = float(np.mean([it["si_sdr"] for it in items]))
        metrics["si_sdr_noisy"] = float(np.mean([it["si_sdr_noisy"] for it in items]))
    else:
        batch = read_pairs_csv(args.input) if args.input else eval_data(cfg)
        est = enhance(model, batch.y, inf)
        with open(out / "enhanced.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f"x_{i}" for i in range(batch.dim)])
            for row in est:
                w.writerow([fmt(v) for v in row])
        per_item = _mse_rows(est, batch.x0)
        metrics["mse"] = float(np.mean(per_item))
        metrics["mse_noisy"] = float(np.mean(_mse_rows(batch.y, batch.x0)))
        metrics["items"] = [float(v) for v in per_item]
    (out / "metrics.json").write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n")
    summary = {k: v for k, v in metrics.items() if k != "items"}
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def sweep(cfg: RunConfig, predictor_for, steps) -> list[tuple[int, float]]:
    """Mean metric per step count. ``predictor_for(batch)`` builds the predictor."""
    rows = []
    if cfg.data.generator == "audio-frames":
        clips = audio_clips(cfg, cfg.data.n_eval_clips, EVAL_OFFSET)
        model = predictor_for(None)
        for n in steps:
            inf = dataclasses.replace(cfg.inference_config(n), mode=InferenceMode.ODE)
            vals = [audio.si_sdr(enhance_waveform(model, cfg, noisy, inf), clean) for clean, noisy in clips]
            rows.append((n, float(np.mean(vals))))
        return rows
    batch = eval_data(cfg)
    model = predictor_for(batch)
    for n in steps:
        inf = dataclasses.replace(cfg.inference_config(n), mode=InferenceMode.ODE)
        rows.append((n, float(np.mean(_mse_rows(enhance(model, batch.y, inf), batch.x0)))))
    return rows


def cmd_sweep_steps(cfg: RunConfig, args) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    kind = LossKind(cfg.train.loss_kind)
    if args.oracle == "exact":
        def predictor_for(batch):
            return ExactPredictor(batch.x0, kind)
    elif args.oracle == "posterior":
        if cfg.data.generator != "gaussian-world":
            raise ConfigError("the posterior oracle needs data.generator = gaussian-world")

        def predictor_for(batch):
            return PosteriorMeanPredictor(toy_dataset(cfg).world(), cfg.path_spec(), kind)
    else:
        model = _load_model(cfg, args)

        def predictor_for(batch):
            return model
    if args.oracle == "exact" and cfg.data.generator == "audio-frames":
        raise ConfigError("the exact oracle is available for toy generators only")
    steps = args.steps or cfg.inference.sweep_steps
    metric = "si_sdr" if cfg.data.generator == "audio-frames" else "mse"
    rows = sweep(cfg, predictor_for, steps)
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n_steps", metric])
        for n, v in rows:
            w.writerow([n, fmt(v)])
    for n, v in rows:
        print(f"N={n:3d}  {metric}={v:.6g}")
    return EXIT_OK


def cmd_oracle_check(cfg: RunConfig, args) -> int:
    results = oracle_suite(cfg.seed, corrupt=args.corrupt, sigma_bar=cfg.inference.sigma_bar)
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    if failed:
        raise InvariantFailure("failed invariants: " + "; ".join(failed))
    return EXIT_OK


def cmd_gradcheck(cfg: RunConfig, args) -> int:
    g = cfg.gradcheck
    h = args.h if args.h is not None else g.h
    results = gradcheck_suite(cfg.seed, g.n_params, h, g.batch_size, tuple(cfg.train.hidden),
                              cfg.train.time_feature_dim, cfg.train.activation,
                              tolerance=g.tolerance)
    for r in results:
        print(r.line())
    print(f"max relative error {max(r.value for r in results):.3e} (h={h:g})")
    failed = [r.name for r in results if not r.passed]
    if failed and not args.diagnostic:
        raise InvariantFailure("gradient check failed: " + "; ".join(failed))
    return EXIT_OK


COMMANDS = {
    "schedule": (cmd_schedule, "write the path curve (t, alpha, beta, var) as CSV"),
    "data": (cmd_data, "dump the evaluation pairs of a toy generator as CSV"),
    "train": (cmd_train, "train a predictor; writes checkpoint and loss trace"),
    "enhance": (cmd_enhance, "run ODE or DDP inference and write outputs + metrics"),
    "sweep-steps": (cmd_sweep_steps, "quality versus number of ODE steps"),
    "oracle-check": (cmd_oracle_check, "run the closed-form invariant suite"),
    "gradcheck": (cmd_gradcheck, "compare analytic and finite-difference gradients"),
}


def build_parser() -> argparse.ArgumentParser:
    # SUPPRESS keeps a flag given before the subcommand from being reset by the subparser
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="TOML run configuration")
    common.add_argument("--seed", type=int, help="override the global seed")
    common.add_argument("--out", help="override the output directory")
    common.add_argument("--dump-defaults", action="store_true",
                        help="print the effective configuration and exit")

    parser = argparse.ArgumentParser(prog="flowpaths", parents=[common],
                                     description=__doc__)
    sub = parser.add_subparsers(dest="command")
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text)
        if name in ("enhance", "sweep-steps"):
            p.add_argument("--checkpoint", help="checkpoint path (default: <out>/checkpoint.fpk)")
        if name == "enhance":
            p.add_argument("--input", help="pairs CSV or noisy WAV (default: generated eval set)")
            p.add_argument("--reference", help="clean WAV for SI-SDR when --input is a WAV")
        if name == "sweep-steps":
            p.add_argument("--steps", type=int, nargs="+", help="step counts to evaluate")
            p.add_argument("--oracle", choices=("exact", "posterior"),
                           help="use a closed-form predictor instead of a checkpoint")
        if name == "oracle-check":
            p.add_argument("--corrupt", action="store_true", help=argparse.SUPPRESS)
        if name == "gradcheck":
            p.add_argument("--h", type=float, help="finite-difference step")
            p.add_argument("--diagnostic", action="store_true",
                           help="report errors without failing")
    return parser


def resolve_config(args) -> RunConfig:
    path = getattr(args, "config", None)
    cfg = load_config(path) if path else RunConfig().validate()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "out", None) is not None:
        cfg.out = args.out
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        if getattr(args, "dump_defaults", False):
            sys.stdout.write(dump_config(cfg))
            return EXIT_OK
        if not args.command:
            parser.print_help()
            return EXIT_CONFIG
        return COMMANDS[args.command][0](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InvariantFailure, NonFiniteStateError, TrainingDivergedError) as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (OSError, audio.WavFormatError, CheckpointFormatError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
