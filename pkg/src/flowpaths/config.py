"""Run configuration: one TOML file per run, every field defaulted."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import tomli
import tomli_w

from .audio import SynthConfig
from .model import TrainConfig
from .paths import PathSpec
from .sampler import InferenceConfig


class ConfigError(ValueError):
    pass


@dataclass
class PathSection:
    family: str = "icfm"
    k: float = 2.6
    c: float = 0.1

    def spec(self) -> PathSpec:
        return PathSpec.from_dict(dataclasses.asdict(self))


@dataclass
class TrainSection:
    loss_kind: str = "dp"
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 64
    steps: int = 8000
    hidden: list = field(default_factory=lambda: [128, 128, 128])
    activation: str = "softplus"
    time_feature_dim: int = 16
    t_min: float = 0.0
    log_every: int = 0


@dataclass
class InferenceSection:
    mode: str = "ode"
    n_steps: int = 50
    sigma_bar: str = "bridge"
    t_max: float = 1.0
    sweep_steps: list = field(default_factory=lambda: [1, 2, 5, 10, 20, 30, 50])


@dataclass
class DataSection:
    # gaussian-world | two-arcs-2d | audio-frames
    generator: str = "gaussian-world"
    n_train: int = 0  # 0: fresh pairs every step (toy generators only)
    n_eval: int = 2000
    noise_var: float = 1.0
    shift: list = field(default_factory=lambda: [0.6, -0.4])
    noise_std: float = 0.3
    jitter: float = 0.0
    n_clips: int = 16
    n_eval_clips: int = 4


@dataclass
class AudioSection:
    window: int = 512
    hop: int = 128
    sample_rate: int = 16000
    duration: float = 1.0
    f0_min: float = 100.0
    f0_max: float = 300.0
    harmonics: int = 8
    noise_color: str = "white"
    snr_min: float = 0.0
    snr_max: float = 15.0
    feature_scale: float = 0.0  # 0: use 4 / window

    def synth(self, seed: int) -> SynthConfig:
        return SynthConfig(self.duration, (self.f0_min, self.f0_max), self.harmonics,
                           self.noise_color, (self.snr_min, self.snr_max), self.sample_rate, seed)

    @property
    def scale(self) -> float:
        return self.feature_scale or 4.0 / self.window


@dataclass
class ScheduleSection:
    n_points: int = 101


@dataclass
class GradcheckSection:
    n_params: int = 100
    h: float = 1e-6
    batch_size: int = 8
    tolerance: float = 1e-4


@dataclass
class RunConfig:
    seed: int = 0
    out: str = "runs/default"
    path: PathSection = field(default_factory=PathSection)
    train: TrainSection = field(default_factory=TrainSection)
    inference: InferenceSection = field(default_factory=InferenceSection)
    data: DataSection = field(default_factory=DataSection)
    audio: AudioSection = field(default_factory=AudioSection)
    schedule: ScheduleSection = field(default_factory=ScheduleSection)
    gradcheck: GradcheckSection = field(default_factory=GradcheckSection)

    def path_spec(self) -> PathSpec:
        return self.path.spec()

    def train_config(self) -> TrainConfig:
        t = self.train
        return TrainConfig(self.path_spec(), t.loss_kind, t.lr, t.beta1, t.beta2, t.eps,
                           t.batch_size, t.steps, self.seed, tuple(t.hidden), t.activation,
                           t.time_feature_dim, t.t_min)

    def inference_config(self, n_steps: int | None = None) -> InferenceConfig:
        i = self.inference
        return InferenceConfig(self.path_spec(), self.train.loss_kind,
                               n_steps if n_steps is not None else i.n_steps, i.mode,
                               i.sigma_bar, i.t_max)

    def validate(self) -> "RunConfig":
        try:
            self.train_config()
            self.inference_config()
            self.audio.synth(self.seed)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.data.generator not in ("gaussian-world", "two-arcs-2d", "audio-frames"):
            raise ConfigError(f"unknown data.generator {self.data.generator!r}")
        return self


def _from_dict(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"[{where}] must be a table")
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(names)
    if unknown:
        raise ConfigError(f"unknown keys in [{where}]: {sorted(unknown)}")
    kwargs = {}
    for key, value in data.items():
        default = getattr(cls(), key)
        if dataclasses.is_dataclass(default):
            kwargs[key] = _from_dict(type(default), value, key)
        elif isinstance(default, bool) != isinstance(value, bool):
            raise ConfigError(f"{where}.{key}: expected {type(default).__name__}")
        elif isinstance(default, float) and isinstance(value, (int, float)):
            kwargs[key] = float(value)
        elif isinstance(default, (int, str, list)) and not isinstance(value, type(default)):
            raise ConfigError(f"{where}.{key}: expected {type(default).__name__}, got {value!r}")
        else:
            kwargs[key] = value
    return cls(**kwargs)


def config_from_dict(data: dict) -> RunConfig:
    return _from_dict(RunConfig, data, "root").validate()


def load_config(path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            data = tomli.load(fh)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(data)


def dump_config(cfg: RunConfig) -> str:
    return tomli_w.dumps(dataclasses.asdict(cfg))
