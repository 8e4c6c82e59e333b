"""Euler sampler for the probability-flow ODE and one-step direct data prediction.

Every step has the affine form::

    x_{t_{n-1}} = a_n x_{t_n} + b_n F(x_{t_n}, y, t_n) + c_n y,   x_{t_N} = y

with ``(a_n, b_n, c_n)`` fixed by the path family and by what ``F`` predicts
(clean data for ``DP`` models, the displacement ``x0 - y`` for ``FM`` models).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .paths import PathFamily, PathSpec, sigma_sq


class LossKind(str, enum.Enum):
    DP = "dp"
    FM = "fm"


class InferenceMode(str, enum.Enum):
    ODE = "ode"
    DDP = "ddp"


class SigmaBar(str, enum.Enum):
    """How the complementary bridge scale is formed in the SB step.

    ``BRIDGE`` uses ``sqrt(sigma_1^2 - sigma_t^2)``, which makes an exact MMSE
    predictor transport ``y`` to ``E[x0 | y]``. ``LITERAL`` uses
    ``sigma_1 - sigma_t``; it still satisfies ``a + b + c = 1`` and lands on
    ``x0`` for an exact predictor, but drifts off the path mean on the way.
    """

    BRIDGE = "bridge"
    LITERAL = "literal"


class NonFiniteStateError(FloatingPointError):
    def __init__(self, step: int, t: float):
        super().__init__(f"non-finite sampler state at step n={step} (t={t:.6g})")
        self.step = step
        self.t = t


class Predictor(Protocol):
    loss_kind: LossKind

    def predict(self, x_t: np.ndarray, y: np.ndarray, t: float) -> np.ndarray: ...


@dataclass(frozen=True)
class Schedule:
    """Strictly decreasing time grid ``t_N > ... > t_0 = 0``.

    ``times[0]`` is 1 unless the grid was deliberately truncated at ``t_max``.
    """

    times: tuple

    def __post_init__(self):
        ts = tuple(float(t) for t in self.times)
        object.__setattr__(self, "times", ts)
        if len(ts) < 2:
            raise ValueError("a schedule needs at least one step")
        if ts[-1] != 0.0:
            raise ValueError(f"schedule must end at 0, ends at {ts[-1]}")
        if not (0.0 < ts[0] <= 1.0):
            raise ValueError(f"schedule must start in (0, 1], starts at {ts[0]}")
        if any(b >= a for a, b in zip(ts, ts[1:])):
            raise ValueError("schedule must be strictly decreasing")

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1

    @property
    def is_uniform(self) -> bool:
        d = np.diff(self.times)
        return bool(np.allclose(d, d[0], rtol=0, atol=1e-12))

    @classmethod
    def uniform(cls, n_steps: int, t_max: float = 1.0) -> "Schedule":
        if n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        ts = np.linspace(t_max, 0.0, n_steps + 1)
        ts[0], ts[-1] = t_max, 0.0
        return cls(tuple(ts))


@dataclass(frozen=True)
class StepCoefficients:
    a: float
    b: float
    c: float
    step_index: int = 0


@dataclass(frozen=True)
class InferenceConfig:
    path: PathSpec
    loss_kind: LossKind = LossKind.DP
    n_steps: int = 50
    mode: InferenceMode = InferenceMode.ODE
    sigma_bar: SigmaBar = SigmaBar.BRIDGE
    t_max: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "loss_kind", LossKind(self.loss_kind))
        object.__setattr__(self, "mode", InferenceMode(self.mode))
        object.__setattr__(self, "sigma_bar", SigmaBar(self.sigma_bar))
        if self.loss_kind is LossKind.FM and self.path.family is not PathFamily.ICFM:
            raise ValueError("the FM loss kind is only defined for the ICFM path")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if not (0.0 < self.t_max <= 1.0):
            raise ValueError("t_max must lie in (0, 1]")
        if self.path.family is PathFamily.ICFM and self.t_max != 1.0:
            raise ValueError("ICFM sampling requires t_max = 1")

    def schedule(self) -> Schedule:
        return Schedule.uniform(self.n_steps, self.t_max)


def sb_step_coeffs(spec: PathSpec, t_n: float, t_prev: float,
                   sigma_bar: SigmaBar = SigmaBar.BRIDGE, step_index: int = 0
                   ) -> StepCoefficients:
    """Bridge ODE step from ``t_n`` down to ``t_prev``.

    At ``t_n = 1`` the complementary scale vanishes and ``a`` and ``c`` blow up
    individually; since the state there is exactly ``y`` only ``a + c`` matters,
    and its finite limit is returned in ``c`` with ``a = 0``.
    """
    if not spec.family.is_bridge:
        raise ValueError("sb_step_coeffs needs an SB family")
    if not (0.0 <= t_prev < t_n <= 1.0):
        raise ValueError(f"need 0 <= t_prev < t_n <= 1, got t_n={t_n}, t_prev={t_prev}")
    sigma_bar = SigmaBar(sigma_bar)
    if t_prev == 0.0:
        return StepCoefficients(0.0, 1.0, 0.0, step_index)

    var1 = sigma_sq(spec, 1.0)
    s1 = math.sqrt(var1)
    sp = math.sqrt(sigma_sq(spec, t_prev))

    if sigma_bar is SigmaBar.BRIDGE:
        def bar(s):
            return math.sqrt(max(var1 - s * s, 0.0))
    else:
        def bar(s):
            return s1 - s

    bp = bar(sp)
    if t_n == 1.0:
        if sigma_bar is SigmaBar.BRIDGE:
            c = sp * sp / var1
        else:
            c = sp * (2.0 * s1 - sp) / var1
        return StepCoefficients(0.0, bp * bp / var1, c, step_index)

    sn = math.sqrt(sigma_sq(spec, t_n))
    bn = bar(sn)
    a = sp * bp / (sn * bn)
    b = (bp * bp - bn * sp * bp / sn) / var1
    c = (sp * sp - sn * sp * bp / bn) / var1
    return StepCoefficients(a, b, c, step_index)


def icfm_step_coeffs(loss_kind: LossKind, n_steps: int, step_index: int = 0) -> StepCoefficients:
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    h = 1.0 / n_steps
    if LossKind(loss_kind) is LossKind.DP:
        return StepCoefficients(1.0, h, -h, step_index)
    return StepCoefficients(1.0, h, 0.0, step_index)


def step_coefficients(cfg: InferenceConfig, schedule: Schedule) -> list[StepCoefficients]:
    """Coefficient triples in execution order (n = N first)."""
    N = schedule.n_steps
    ts = schedule.times
    if cfg.path.family is PathFamily.ICFM:
        if not schedule.is_uniform or ts[0] != 1.0:
            raise ValueError("ICFM steps assume a uniform grid on [0, 1]")
        return [icfm_step_coeffs(cfg.loss_kind, N, N - i) for i in range(N)]
    return [sb_step_coeffs(cfg.path, ts[i], ts[i + 1], cfg.sigma_bar, N - i) for i in range(N)]


def solve_ode(model: Predictor, y, cfg: InferenceConfig, schedule: Schedule | None = None,
              coeffs: Sequence[StepCoefficients] | None = None) -> np.ndarray:
    """Run the Euler recurrence from ``x = y`` at ``t_N`` to ``t_0 = 0``.

    ``y`` is a single vector or a batch of row vectors. ``coeffs`` overrides the
    computed triples (used by the oracle checks to inject corrupted steps).
    """
    schedule = schedule or cfg.schedule()
    if schedule.n_steps != cfg.n_steps:
        raise ValueError(f"schedule has {schedule.n_steps} steps, config says {cfg.n_steps}")
    if LossKind(model.loss_kind) is not cfg.loss_kind:
        raise ValueError(f"model predicts {model.loss_kind}, config expects {cfg.loss_kind}")
    if coeffs is None:
        coeffs = step_coefficients(cfg, schedule)
    y = np.asarray(y, dtype=np.float64)
    x = y.copy()
    for i, co in enumerate(coeffs):
        t_n = schedule.times[i]
        f = np.asarray(model.predict(x, y, t_n), dtype=np.float64)
        if f.shape != y.shape:
            raise ValueError(f"predictor returned shape {f.shape}, expected {y.shape}")
        # state and y terms first: for N=1 ICFM this makes (y - y) + F == F bitwise
        x = (co.a * x + co.c * y) + co.b * f
        if not np.all(np.isfinite(x)):
            raise NonFiniteStateError(co.step_index, t_n)
    return x


def ddp_infer(model: Predictor, y) -> np.ndarray:
    """One-step estimate: ``F(y, y, 1)`` for DP models, plus ``y`` for FM models."""
    y = np.asarray(y, dtype=np.float64)
    f = np.asarray(model.predict(y, y, 1.0), dtype=np.float64)
    if LossKind(model.loss_kind) is LossKind.FM:
        return f + y
    return f


def enhance(model: Predictor, y, cfg: InferenceConfig) -> np.ndarray:
    if cfg.mode is InferenceMode.DDP:
        return ddp_infer(model, y)
    return solve_ode(model, y, cfg)
