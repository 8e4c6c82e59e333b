"""Fully-connected predictor ``F(x_t, y, t)`` with hand-written backprop.

The network sees ``concat(x_t, y, time_features(t))`` and returns a vector of
the data dimension. DP models regress ``x0``; FM models regress ``x0 - y``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .paths import PairedBatch, PathFamily, PathSpec, sample_perturbation
from .sampler import LossKind

CHECKPOINT_MAGIC = b"FLOWPATHS-CKPT 1\n"
ACTIVATIONS = ("softplus", "tanh")


class CheckpointFormatError(ValueError):
    pass


class TrainingDivergedError(FloatingPointError):
    def __init__(self, step: int, value: float):
        super().__init__(f"loss became non-finite ({value}) at training step {step}")
        self.step = step


def time_features(t, dim: int) -> np.ndarray:
    """Interleaved ``[sin(2 pi f_i t), cos(2 pi f_i t)]`` with ``f_i`` geometric in [1, 1000].

    Scalar ``t`` gives shape ``(dim,)``; an array of times gives ``(len(t), dim)``.
    """
    if dim <= 0 or dim % 2:
        raise ValueError(f"time feature dim must be a positive even integer, got {dim}")
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any((t_arr < 0.0) | (t_arr > 1.0)):
        raise ValueError("t must lie in [0, 1]")
    freqs = np.geomspace(1.0, 1000.0, dim // 2)
    ang = 2.0 * np.pi * t_arr[..., None] * freqs
    out = np.empty(ang.shape[:-1] + (dim,))
    out[..., 0::2] = np.sin(ang)
    out[..., 1::2] = np.cos(ang)
    return out


def _act(name: str, a: np.ndarray) -> np.ndarray:
    if name == "softplus":
        return np.logaddexp(0.0, a)
    return np.tanh(a)


def _act_grad(name: str, a: np.ndarray, h: np.ndarray) -> np.ndarray:
    if name == "softplus":
        return 0.5 * (1.0 + np.tanh(0.5 * a))
    return 1.0 - h * h


@dataclass
class PredictorModel:
    weights: list
    biases: list
    loss_kind: LossKind
    data_dim: int
    time_feature_dim: int = 16
    activation: str = "softplus"
    path: PathSpec | None = None

    def __post_init__(self):
        self.loss_kind = LossKind(self.loss_kind)
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("need one bias per weight matrix")
        fan_in = self.input_dim
        for W, b in zip(self.weights, self.biases):
            if W.shape[0] != fan_in or b.shape != (W.shape[1],):
                raise ValueError("layer shapes do not chain")
            fan_in = W.shape[1]
        if fan_in != self.data_dim:
            raise ValueError("output layer must match the data dimension")

    @property
    def input_dim(self) -> int:
        return 2 * self.data_dim + self.time_feature_dim

    @property
    def params(self) -> list:
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.params)

    def copy(self) -> "PredictorModel":
        return PredictorModel([W.copy() for W in self.weights], [b.copy() for b in self.biases],
                              self.loss_kind, self.data_dim, self.time_feature_dim,
                              self.activation, self.path)

    def _inputs(self, x_t, y, t) -> np.ndarray:
        x_t = np.asarray(x_t, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if x_t.shape != y.shape or x_t.shape[-1] != self.data_dim:
            raise ValueError(f"expected inputs of dim {self.data_dim}, got {x_t.shape} and {y.shape}")
        if not (np.all(np.isfinite(x_t)) and np.all(np.isfinite(y))):
            raise ValueError("non-finite model input")
        tf = time_features(t, self.time_feature_dim)
        if x_t.ndim == 2 and tf.ndim == 1:
            tf = np.broadcast_to(tf, (x_t.shape[0], tf.shape[0]))
        return np.concatenate([x_t, y, tf], axis=-1)

    def _forward(self, z: np.ndarray):
        pre, post = [], [z]
        h = z
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            a = h @ W + b
            h = _act(self.activation, a)
            pre.append(a)
            post.append(h)
        out = h @ self.weights[-1] + self.biases[-1]
        return out, pre, post

    def forward(self, x_t, y, t) -> np.ndarray:
        return self._forward(self._inputs(x_t, y, t))[0]

    predict = forward

    def loss_and_grad(self, x_t, y, t, target):
        """Batch mean of squared errors and its gradient for every parameter."""
        z = self._inputs(np.atleast_2d(x_t), np.atleast_2d(y), t)
        target = np.atleast_2d(target)
        out, pre, post = self._forward(z)
        n = out.shape[0]
        r = out - target
        loss = float(np.sum(r * r) / n)
        g = 2.0 * r / n
        grads_W, grads_b = [], []
        for layer in range(len(self.weights) - 1, -1, -1):
            grads_W.append(post[layer].T @ g)
            grads_b.append(g.sum(axis=0))
            if layer > 0:
                g = (g @ self.weights[layer].T) * _act_grad(self.activation, pre[layer - 1], post[layer])
        grads_W.reverse()
        grads_b.reverse()
        grads = []
        for gW, gb in zip(grads_W, grads_b):
            grads += [gW, gb]
        return loss, grads


def init_model(data_dim: int, loss_kind: LossKind, rng: np.random.Generator,
               hidden=(128, 128, 128), time_feature_dim: int = 16,
               activation: str = "softplus", zero_final: bool = True,
               path: PathSpec | None = None) -> PredictorModel:
    """Scaled-normal init; a zero final layer makes the initial model the zero function."""
    sizes = [2 * data_dim + time_feature_dim, *hidden, data_dim]
    weights, biases = [], []
    for i, (fi, fo) in enumerate(zip(sizes, sizes[1:])):
        last = i == len(sizes) - 2
        if last and zero_final:
            W = np.zeros((fi, fo))
        else:
            W = rng.standard_normal((fi, fo)) / math.sqrt(fi)
        weights.append(W)
        biases.append(np.zeros(fo))
    return PredictorModel(weights, biases, loss_kind, data_dim, time_feature_dim, activation, path)


def training_inputs(batch: PairedBatch, spec: PathSpec, loss_kind: LossKind,
                    rng: np.random.Generator, t_min: float = 0.0):
    """Draw ``t ~ U[t_min, 1]`` and ``x_t ~ p_t(. | x0, y)`` per pair; return ``(x_t, t, target)``."""
    loss_kind = LossKind(loss_kind)
    if loss_kind is LossKind.FM and spec.family is not PathFamily.ICFM:
        raise ValueError("the FM loss is only defined for the ICFM path")
    t = rng.uniform(t_min, 1.0, size=len(batch))
    x_t = sample_perturbation(spec, batch.x0, batch.y, t, rng, batch.complex_valued)
    target = batch.x0 if loss_kind is LossKind.DP else batch.x0 - batch.y
    return x_t, t, target


def loss(model: PredictorModel, batch: PairedBatch, spec: PathSpec, rng: np.random.Generator,
         t_min: float = 0.0):
    x_t, t, target = training_inputs(batch, spec, model.loss_kind, rng, t_min)
    return model.loss_and_grad(x_t, batch.y, t, target)


@dataclass
class TrainConfig:
    path: PathSpec
    loss_kind: LossKind = LossKind.DP
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 64
    steps: int = 20000
    seed: int = 0
    hidden: tuple = (128, 128, 128)
    activation: str = "softplus"
    time_feature_dim: int = 16
    t_min: float = 0.0

    def __post_init__(self):
        self.loss_kind = LossKind(self.loss_kind)
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.lr < 0:
            raise ValueError("learning rate must be non-negative")
        if self.batch_size < 1 or self.steps < 0:
            raise ValueError("batch_size must be >= 1 and steps >= 0")
        if not (0.0 <= self.t_min < 1.0):
            raise ValueError("t_min must lie in [0, 1)")
        if self.loss_kind is LossKind.FM and self.path.family is not PathFamily.ICFM:
            raise ValueError("the FM loss is only defined for the ICFM path")


@dataclass
class Adam:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def update(self, params: list, grads: list) -> None:
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.step_count += 1
        bc1 = 1.0 - self.beta1 ** self.step_count
        bc2 = 1.0 - self.beta2 ** self.step_count
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


DataSource = Callable[[np.random.Generator, int], PairedBatch]


def _batch_sampler(data) -> DataSource:
    if callable(data):
        return data

    def draw(rng, n):
        return data.subset(rng.integers(0, len(data), size=n))

    return draw


def train(cfg: TrainConfig, data, data_dim: int | None = None, rng: np.random.Generator | None = None,
          log_every: int = 0, log=print):
    """Fit a predictor with Adam. Returns ``(model, loss_trace)``.

    ``data`` is either a fixed ``PairedBatch`` pool (minibatches drawn with
    replacement) or a callable ``(rng, n) -> PairedBatch`` producing fresh pairs.
    """
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    draw = _batch_sampler(data)
    if data_dim is None:
        if isinstance(data, PairedBatch):
            data_dim = data.dim
        else:
            raise ValueError("data_dim is required for callable data sources")
    model = init_model(data_dim, cfg.loss_kind, rng, cfg.hidden, cfg.time_feature_dim,
                       cfg.activation, path=cfg.path)
    opt = Adam(cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
    params = model.params
    trace = np.empty(cfg.steps)
    for step in range(cfg.steps):
        batch = draw(rng, cfg.batch_size)
        value, grads = loss(model, batch, cfg.path, rng, cfg.t_min)
        if not math.isfinite(value):
            raise TrainingDivergedError(step, value)
        trace[step] = value
        opt.update(params, grads)
        if log_every and (step + 1) % log_every == 0:
            log(f"step {step + 1:6d}  loss {trace[max(0, step - log_every + 1):step + 1].mean():.6f}")
    return model, trace


def gradient_check(model: PredictorModel, x_t, y, t, target, rng: np.random.Generator,
                   n_params: int = 100, h: float = 1e-6, floor: float = 1e-8) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``n_params`` scalar parameters are picked uniformly over the whole network.
    Relative error is ``|g - g_fd| / max(|g|, |g_fd|, floor)``.
    """
    _, grads = model.loss_and_grad(x_t, y, t, target)
    probe = model.copy()
    params = probe.params
    sizes = np.array([p.size for p in params])
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    picks = rng.choice(offsets[-1], size=min(n_params, offsets[-1]), replace=False)
    worst = 0.0
    for flat in picks:
        which = int(np.searchsorted(offsets, flat, side="right") - 1)
        idx = np.unravel_index(flat - offsets[which], params[which].shape)
        p = params[which]
        orig = p[idx]
        p[idx] = orig + h
        lp, _ = probe.loss_and_grad(x_t, y, t, target)
        p[idx] = orig - h
        lm, _ = probe.loss_and_grad(x_t, y, t, target)
        p[idx] = orig
        g_fd = (lp - lm) / (2.0 * h)
        g_an = grads[which][idx]
        rel = abs(g_an - g_fd) / max(abs(g_an), abs(g_fd), floor)
        worst = max(worst, rel)
    return worst


# --- checkpoint container -------------------------------------------------
#
# line 1: b"FLOWPATHS-CKPT 1\n"
# line 2: compact JSON header, sorted keys, terminated by "\n"
# rest:   parameters as little-endian float64, W0 b0 W1 b1 ... in C order


def save_checkpoint(model: PredictorModel, path) -> None:
    header = {
        "activation": model.activation,
        "data_dim": model.data_dim,
        "dtype": "<f8",
        "loss_kind": model.loss_kind.value,
        "path": model.path.to_dict() if model.path else None,
        "shapes": [list(p.shape) for p in model.params],
        "time_feature_dim": model.time_feature_dim,
    }
    blob = b"".join(np.ascontiguousarray(p, dtype="<f8").tobytes() for p in model.params)
    with open(Path(path), "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(json.dumps(header, sort_keys=True, separators=(",", ":")).encode() + b"\n")
        fh.write(blob)


def load_checkpoint(path) -> PredictorModel:
    raw = Path(path).read_bytes()
    if not raw.startswith(CHECKPOINT_MAGIC):
        raise CheckpointFormatError(f"{path}: not a flowpaths checkpoint")
    rest = raw[len(CHECKPOINT_MAGIC):]
    nl = rest.index(b"\n")
    header = json.loads(rest[:nl])
    data = rest[nl + 1:]
    params, pos = [], 0
    for shape in header["shapes"]:
        n = int(np.prod(shape))
        if pos + 8 * n > len(data):
            raise CheckpointFormatError(f"{path}: truncated parameter block")
        params.append(np.frombuffer(data, dtype="<f8", count=n, offset=pos).reshape(shape).astype(np.float64))
        pos += 8 * n
    if pos != len(data):
        raise CheckpointFormatError(f"{path}: trailing bytes after parameters")
    path_spec = PathSpec.from_dict(header["path"]) if header.get("path") else None
    return PredictorModel(params[0::2], params[1::2], LossKind(header["loss_kind"]),
                          header["data_dim"], header["time_feature_dim"], header["activation"],
                          path_spec)
