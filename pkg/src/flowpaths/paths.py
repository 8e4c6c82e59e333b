"""Gaussian probability paths between paired clean/degraded samples.

Three families are supported:

* ``SB_VE``  Schroedinger bridge with a variance-exploding reference. Mean is a
  sub-linear interpolation weighted by ``sigma_t^2 / sigma_1^2``; the marginal
  variance is zero at both ends.
* ``SB_SV``  same mean as ``SB_VE`` but with a constant variance ``c``.
* ``ICFM``   linear interpolation ``(1 - t) x0 + t y`` with constant variance ``c``.

All three are affine in ``(x0, y)`` so every point on a path is described by a
weight on ``x0`` (alpha), a weight on ``y`` (beta = 1 - alpha) and a variance.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

# Below this distance from 1 the schedule base is treated as exactly 1.
K_LIMIT_TOL = 1e-4


class PathFamily(str, enum.Enum):
    SB_VE = "sb-ve"
    SB_SV = "sb-sv"
    ICFM = "icfm"

    @property
    def is_bridge(self) -> bool:
        return self is not PathFamily.ICFM


@dataclass(frozen=True)
class PathSpec:
    """Path family plus its shape parameters.

    ``k`` is the base of the bridge schedule and is ignored for ICFM. ``c`` is
    the diffusion scale for SB-VE and the constant variance for SB-SV/ICFM.
    """

    family: PathFamily
    k: float = 2.6
    c: float = 0.4

    def __post_init__(self):
        object.__setattr__(self, "family", PathFamily(self.family))
        if not (self.c > 0 and math.isfinite(self.c)):
            raise ValueError(f"c must be positive and finite, got {self.c}")
        if self.family.is_bridge and not (self.k > 0 and math.isfinite(self.k)):
            raise ValueError(f"k must be positive and finite, got {self.k}")

    def to_dict(self) -> dict:
        return {"family": self.family.value, "k": float(self.k), "c": float(self.c)}

    @classmethod
    def from_dict(cls, d: dict) -> "PathSpec":
        unknown = set(d) - {"family", "k", "c"}
        if unknown:
            raise ValueError(f"unknown path keys: {sorted(unknown)}")
        return cls(PathFamily(d["family"]), float(d.get("k", 2.6)), float(d.get("c", 0.4)))


# (family, k, c) rows used in the reference experiments.
REFERENCE_SPECS = (
    PathSpec(PathFamily.SB_VE, k=2.6, c=0.4),
    PathSpec(PathFamily.SB_VE, k=0.99, c=0.375),
    PathSpec(PathFamily.SB_SV, k=2.6, c=0.15),
    PathSpec(PathFamily.SB_SV, k=0.99, c=0.1),
    PathSpec(PathFamily.ICFM, k=1.0, c=0.1),
)


@dataclass(frozen=True)
class PathPoint:
    t: float
    alpha: float
    beta: float
    var: float


@dataclass
class PairedBatch:
    """Matched clean targets ``x0`` and degraded sources ``y``, one pair per row.

    ``complex_valued`` marks rows that are interleaved (re, im) views of complex
    vectors; perturbation noise is then split evenly between the two parts.
    """

    x0: np.ndarray
    y: np.ndarray
    complex_valued: bool = False
    dim: int = field(init=False)

    def __post_init__(self):
        self.x0 = np.atleast_2d(np.asarray(self.x0, dtype=np.float64))
        self.y = np.atleast_2d(np.asarray(self.y, dtype=np.float64))
        if self.x0.shape != self.y.shape:
            raise ValueError(f"x0 shape {self.x0.shape} != y shape {self.y.shape}")
        if self.x0.shape[0] == 0:
            raise ValueError("empty batch")
        self.dim = self.x0.shape[1]
        if self.complex_valued and self.dim % 2:
            raise ValueError("complex-valued rows need an even dimension")

    def __len__(self) -> int:
        return self.x0.shape[0]

    def subset(self, idx) -> "PairedBatch":
        return PairedBatch(self.x0[idx], self.y[idx], self.complex_valued)


def _check_t(t) -> None:
    t_arr = np.asarray(t, dtype=np.float64)
    if not np.all((t_arr >= 0.0) & (t_arr <= 1.0)):
        raise ValueError(f"t must lie in [0, 1], got {t}")


def sigma_sq(spec: PathSpec, t):
    """Bridge noise schedule ``c (k^(2t) - 1) / (2 ln k)``; ``c t`` as k -> 1.

    Accepts a scalar or an array of times.
    """
    if not spec.family.is_bridge:
        raise ValueError("ICFM has no sigma_t schedule")
    _check_t(t)
    t = np.asarray(t, dtype=np.float64)
    if abs(spec.k - 1.0) < K_LIMIT_TOL:
        out = spec.c * t
    else:
        log_k = math.log(spec.k)
        out = spec.c * np.expm1(2.0 * t * log_k) / (2.0 * log_k)
    return float(out) if out.ndim == 0 else out


def path_weights(spec: PathSpec, t):
    """Return ``(alpha, beta, var)`` for scalar or array ``t``."""
    _check_t(t)
    t = np.asarray(t, dtype=np.float64)
    if spec.family is PathFamily.ICFM:
        beta = t.copy()
        var = np.full_like(t, spec.c)
    else:
        s_t = sigma_sq(spec, t)
        s_1 = sigma_sq(spec, 1.0)
        beta = np.asarray(s_t / s_1, dtype=np.float64)
        if spec.family is PathFamily.SB_VE:
            var = np.maximum(s_t * (1.0 - beta), 0.0)
        else:
            var = np.full_like(t, spec.c)
    alpha = 1.0 - beta
    return alpha, beta, np.asarray(var, dtype=np.float64)


def path_point(spec: PathSpec, t: float) -> PathPoint:
    alpha, beta, var = path_weights(spec, float(t))
    return PathPoint(float(t), float(alpha), float(beta), float(var))


def sample_perturbation(spec: PathSpec, x0, y, t, rng: np.random.Generator,
                        complex_valued: bool = False) -> np.ndarray:
    """Draw ``x_t ~ N(alpha x0 + beta y, var I)``.

    ``t`` may be a scalar or one time per row of a 2-D ``x0``. With
    ``complex_valued`` each real coordinate gets half the variance, which is
    circular complex noise of variance ``var`` on interleaved (re, im) pairs.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x0.shape != y.shape:
        raise ValueError(f"dimension mismatch: x0 {x0.shape} vs y {y.shape}")
    alpha, beta, var = path_weights(spec, t)
    if alpha.ndim == 1:
        alpha, beta, var = alpha[:, None], beta[:, None], var[:, None]
    if complex_valued:
        var = var / 2.0
    eps = rng.standard_normal(x0.shape)
    return alpha * x0 + beta * y + np.sqrt(var) * eps


def schedule_curve(spec: PathSpec, n_points: int) -> list[PathPoint]:
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    ts = np.linspace(0.0, 1.0, n_points)
    alpha, beta, var = path_weights(spec, ts)
    return [PathPoint(float(t), float(a), float(b), float(v))
            for t, a, b, v in zip(ts, alpha, beta, var)]


def fmt(x: float) -> str:
    """17 significant digits: exact round trip for float64."""
    return f"{x:.17g}"


def write_schedule_csv(points: Iterable[PathPoint], path) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "alpha", "beta", "var"])
        for p in points:
            w.writerow([fmt(p.t), fmt(p.alpha), fmt(p.beta), fmt(p.var)])
