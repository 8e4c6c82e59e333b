"""Flow-based paired-data samplers: SB-VE, SB-SV and ICFM paths, Euler ODE and one-step inference."""

from .paths import PathFamily, PathSpec, PathPoint, PairedBatch, path_point, sample_perturbation, schedule_curve, sigma_sq
from .sampler import (InferenceConfig, InferenceMode, LossKind, Schedule, SigmaBar, StepCoefficients,
                      ddp_infer, icfm_step_coeffs, sb_step_coeffs, solve_ode)
from .model import PredictorModel, TrainConfig, init_model, load_checkpoint, save_checkpoint, time_features, train

__all__ = [
    "PathFamily", "PathSpec", "PathPoint", "PairedBatch", "path_point", "sample_perturbation",
    "schedule_curve", "sigma_sq", "InferenceConfig", "InferenceMode", "LossKind", "Schedule",
    "SigmaBar", "StepCoefficients", "ddp_infer", "icfm_step_coeffs", "sb_step_coeffs", "solve_ode",
    "PredictorModel", "TrainConfig", "init_model", "load_checkpoint", "save_checkpoint",
    "time_features", "train",
]
