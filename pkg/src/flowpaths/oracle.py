"""Closed-form ground truth: Gaussian worlds, MMSE predictors and sample distances."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from .paths import PairedBatch, PathSpec, fmt, path_weights
from .sampler import LossKind


def _psd(m: np.ndarray, name: str, strict: bool) -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square")
    if not np.allclose(m, m.T, atol=1e-12):
        raise ValueError(f"{name} must be symmetric")
    eig = np.linalg.eigvalsh(m)
    if strict and eig.min() <= 0:
        raise ValueError(f"{name} must be positive definite")
    if eig.min() < -1e-12:
        raise ValueError(f"{name} must be positive semi-definite")


@dataclass
class GaussianWorld:
    """``x0 ~ N(mean_x0, cov_x0)`` and ``y = A x0 + u + n`` with ``n ~ N(0, noise_cov)``.

    A zero ``noise_cov`` is allowed (noiseless degradation).
    """

    mean_x0: np.ndarray
    cov_x0: np.ndarray
    A: np.ndarray | None = None
    u: np.ndarray | None = None
    noise_cov: np.ndarray | None = None

    def __post_init__(self):
        self.mean_x0 = np.atleast_1d(np.asarray(self.mean_x0, dtype=np.float64))
        d = self.mean_x0.shape[0]
        self.cov_x0 = np.atleast_2d(np.asarray(self.cov_x0, dtype=np.float64))
        self.A = np.eye(d) if self.A is None else np.atleast_2d(np.asarray(self.A, dtype=np.float64))
        self.u = np.zeros(d) if self.u is None else np.atleast_1d(np.asarray(self.u, dtype=np.float64))
        self.noise_cov = (np.eye(d) if self.noise_cov is None
                          else np.atleast_2d(np.asarray(self.noise_cov, dtype=np.float64)))
        for m in (self.cov_x0, self.A, self.noise_cov):
            if m.shape != (d, d):
                raise ValueError(f"matrix shape {m.shape} does not match dim {d}")
        _psd(self.cov_x0, "cov_x0", strict=True)
        _psd(self.noise_cov, "noise_cov", strict=False)
        if np.linalg.matrix_rank(self.A) < d:
            raise ValueError("A must be full rank")

    @property
    def dim(self) -> int:
        return self.mean_x0.shape[0]

    @classmethod
    def standard(cls, noise_var: float = 1.0) -> "GaussianWorld":
        """1-D world: ``x0 ~ N(0, 1)``, ``y = x0 + n``, ``n ~ N(0, noise_var)``."""
        return cls([0.0], [[1.0]], noise_cov=[[noise_var]])

    def y_moments(self):
        mean_y = self.A @ self.mean_x0 + self.u
        cov_xy = self.cov_x0 @ self.A.T
        cov_y = self.A @ self.cov_x0 @ self.A.T + self.noise_cov
        return mean_y, cov_xy, cov_y


def sample_pairs(world: GaussianWorld, rng: np.random.Generator, n: int) -> PairedBatch:
    L = np.linalg.cholesky(world.cov_x0)
    x0 = world.mean_x0 + rng.standard_normal((n, world.dim)) @ L.T
    w, V = np.linalg.eigh(world.noise_cov)
    noise = (rng.standard_normal((n, world.dim)) * np.sqrt(np.clip(w, 0.0, None))) @ V.T
    y = x0 @ world.A.T + world.u + noise
    return PairedBatch(x0, y)


def sample_pair(world: GaussianWorld, rng: np.random.Generator):
    b = sample_pairs(world, rng, 1)
    return b.x0[0], b.y[0]


def conditional_moments(world: GaussianWorld, y):
    """Mean (per row of ``y``) and shared covariance of ``x0 | y``."""
    mean_y, cov_xy, cov_y = world.y_moments()
    try:
        cf = np.linalg.cholesky(cov_y)
    except np.linalg.LinAlgError:
        raise np.linalg.LinAlgError("covariance of y is singular") from None
    gain = np.linalg.solve(cf.T, np.linalg.solve(cf, cov_xy.T)).T  # cov_xy cov_y^-1
    y = np.asarray(y, dtype=np.float64)
    mean = world.mean_x0 + (y - mean_y) @ gain.T
    cov = world.cov_x0 - gain @ cov_xy.T
    return mean, 0.5 * (cov + cov.T)


def conditional_mean_x0_given_y(world: GaussianWorld, y) -> np.ndarray:
    return conditional_moments(world, y)[0]


def posterior_mean_x0(world: GaussianWorld, spec: PathSpec, x_t, y, t,
                      complex_valued: bool = False) -> np.ndarray:
    """``E[x0 | x_t, y]`` when ``x_t = alpha x0 + beta y + sqrt(var) eps``.

    This is the minimiser of the data-prediction loss. ``t`` is a scalar or one
    time per row.
    """
    x_t = np.asarray(x_t, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    t_arr = np.asarray(t, dtype=np.float64)
    if t_arr.ndim == 1:
        return np.stack([posterior_mean_x0(world, spec, x_t[i], y[i], float(t_arr[i]), complex_valued)
                         for i in range(t_arr.shape[0])])
    alpha, beta, var = (float(v) for v in path_weights(spec, float(t_arr)))
    if complex_valued:
        var /= 2.0
    m, P = conditional_moments(world, y)
    if alpha == 0.0:
        return m
    S = alpha * alpha * P + var * np.eye(world.dim)
    K = alpha * P @ np.linalg.pinv(S, hermitian=True)
    resid = x_t - beta * y - alpha * m
    return m + resid @ K.T


class ExactPredictor:
    """Predictor that knows the true ``x0``: returns ``x0`` (DP) or ``x0 - y`` (FM)."""

    def __init__(self, x0, loss_kind: LossKind = LossKind.DP):
        self.x0 = np.asarray(x0, dtype=np.float64)
        self.loss_kind = LossKind(loss_kind)

    def predict(self, x_t, y, t):
        if self.loss_kind is LossKind.DP:
            return np.broadcast_to(self.x0, np.shape(y)).copy()
        return self.x0 - np.asarray(y)


class PosteriorMeanPredictor:
    """MMSE predictor for a Gaussian world along a given path."""

    def __init__(self, world: GaussianWorld, spec: PathSpec, loss_kind: LossKind = LossKind.DP):
        self.world = world
        self.spec = spec
        self.loss_kind = LossKind(loss_kind)

    def predict(self, x_t, y, t):
        m = posterior_mean_x0(self.world, self.spec, x_t, y, t)
        return m if self.loss_kind is LossKind.DP else m - np.asarray(y)


def two_arcs(rng: np.random.Generator, n: int, shift=(0.6, -0.4), noise_std: float = 0.3,
             jitter: float = 0.0) -> PairedBatch:
    """Two interleaved half-circles; degraded by a fixed shift plus isotropic noise."""
    theta = rng.uniform(0.0, np.pi, size=n)
    upper = rng.random(n) < 0.5
    x = np.where(upper, np.cos(theta), 1.0 - np.cos(theta))
    yy = np.where(upper, np.sin(theta), 0.5 - np.sin(theta))
    x0 = np.stack([x, yy], axis=1)
    if jitter > 0:
        x0 = x0 + jitter * rng.standard_normal(x0.shape)
    y = x0 + np.asarray(shift, dtype=np.float64) + noise_std * rng.standard_normal(x0.shape)
    return PairedBatch(x0, y)


@dataclass
class ToyDataset:
    """Reproducible pair generator, identified by ``(tag, params, seed)``."""

    tag: str = "gaussian-world"
    params: dict = field(default_factory=dict)
    seed: int = 0

    TAGS = ("gaussian-world", "two-arcs-2d")

    def __post_init__(self):
        if self.tag not in self.TAGS:
            raise ValueError(f"unknown dataset tag {self.tag!r}; expected one of {self.TAGS}")

    @property
    def dim(self) -> int:
        return 2 if self.tag == "two-arcs-2d" else 1

    def world(self) -> GaussianWorld:
        return GaussianWorld.standard(float(self.params.get("noise_var", 1.0)))

    def draw(self, rng: np.random.Generator, n: int) -> PairedBatch:
        if self.tag == "two-arcs-2d":
            return two_arcs(rng, n, tuple(self.params.get("shift", (0.6, -0.4))),
                            float(self.params.get("noise_std", 0.3)),
                            float(self.params.get("jitter", 0.0)))
        return sample_pairs(self.world(), rng, n)

    def sample(self, n: int, offset: int = 0) -> PairedBatch:
        """Fixed set from ``seed + offset``; use distinct offsets for train/eval splits."""
        return self.draw(np.random.default_rng(self.seed + offset), n)


def energy_distance(a, b, chunk: int = 2048) -> float:
    """V-statistic energy distance ``2 E|X-Y| - E|X-X'| - E|Y-Y'|``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    a = a[:, None] if a.ndim == 1 else a
    b = b[:, None] if b.ndim == 1 else b
    if len(a) == 0 or len(b) == 0 or a.shape[1] != b.shape[1]:
        raise ValueError("need non-empty sample sets of equal dimension")

    def mean_dist(p, q):
        total = 0.0
        for i in range(0, len(p), chunk):
            total += cdist(p[i:i + chunk], q).sum()
        return total / (len(p) * len(q))

    return max(2.0 * mean_dist(a, b) - mean_dist(a, a) - mean_dist(b, b), 0.0)


def write_pairs_csv(batch: PairedBatch, path) -> None:
    d = batch.dim
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x0_{i}" for i in range(d)] + [f"y_{i}" for i in range(d)])
        for x0, y in zip(batch.x0, batch.y):
            w.writerow([fmt(v) for v in x0] + [fmt(v) for v in y])


def read_pairs_csv(path) -> PairedBatch:
    with open(Path(path), newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array(rows[1:], dtype=np.float64)
    d = sum(1 for h in header if h.startswith("x0_"))
    if 2 * d != len(header):
        raise ValueError(f"{path}: expected x0_* then y_* columns")
    return PairedBatch(body[:, :d], body[:, d:])
