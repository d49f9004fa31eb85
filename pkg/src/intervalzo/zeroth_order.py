"""Two-point randomized-difference gradient estimation and its step-size laws."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "EvaluationError",
    "PerturbationDist",
    "StepSchedule",
    "GradientEstimate",
    "ScheduleReport",
    "rademacher",
    "symmetric_two_point",
    "agent_stream",
    "draw_perturbation",
    "step_schedule",
    "randomized_difference",
    "schedule_diagnostics",
]


class EvaluationError(ArithmeticError):
    """Objective oracle returned a non-finite value."""


@dataclass(frozen=True)
class PerturbationDist:
    """Symmetric two-point law on ``{-a, +a}``; ``a = 1`` is Rademacher.

    Both support points have the same magnitude, so ``E[1/Delta] = 0`` holds
    exactly and ``|Delta| <= a``, ``|1/Delta| <= 1/a``.
    """

    kind: str = "rademacher"
    a: float = 1.0

    def __post_init__(self):
        if self.kind not in ("rademacher", "symmetric_two_point"):
            raise ValueError(f"unknown perturbation kind {self.kind!r}")
        a = float(self.a)
        if not (math.isfinite(a) and a > 0):
            raise ValueError(f"perturbation magnitude must be positive, got {self.a}")
        if self.kind == "rademacher" and a != 1.0:
            raise ValueError("rademacher perturbations have magnitude 1")
        object.__setattr__(self, "a", a)

    @property
    def bound_M1(self) -> float:
        return self.a

    @property
    def inv_bound_M2(self) -> float:
        return 1.0 / self.a


def rademacher() -> PerturbationDist:
    return PerturbationDist("rademacher", 1.0)


def symmetric_two_point(a: float) -> PerturbationDist:
    return PerturbationDist("symmetric_two_point", a)


def agent_stream(seed: int, agent: int, iteration: int) -> np.random.Generator:
    """Private generator for one agent at one iteration.

    Counter-based (Philox keyed by ``(seed, agent)``, counter set from the
    iteration), so draws never depend on evaluation order or worker count.
    """
    if seed < 0 or agent < 0 or iteration < 0:
        raise ValueError("seed, agent and iteration must be non-negative")
    bitgen = np.random.Philox(key=[seed, agent], counter=[0, iteration, 0, 0])
    return np.random.Generator(bitgen)


def draw_perturbation(dist: PerturbationDist, dim: int, rng: np.random.Generator) -> np.ndarray:
    if dim < 1:
        raise ValueError("dim must be at least 1")
    signs = rng.integers(0, 2, size=dim) * 2 - 1
    return dist.a * signs.astype(float)


def _power_step(k, exponent):
    return 1.0 / np.power(np.asarray(k, dtype=float) + 1.0, exponent)


@dataclass(frozen=True)
class StepSchedule:
    """``iota(k) = (k+1)^-(1-epsilon)`` and ``c(k) = (k+1)^-delta`` for ``k >= 0``.

    Valid when ``0 <= epsilon < 1/4`` and ``epsilon < delta < 1/2 - epsilon``.
    """

    epsilon: float
    delta: float

    def __post_init__(self):
        eps, delta = float(self.epsilon), float(self.delta)
        if not (math.isfinite(eps) and math.isfinite(delta)):
            raise ValueError("epsilon and delta must be finite")
        if not eps >= 0:
            raise ValueError(f"step schedule violates 0 <= epsilon (epsilon={eps})")
        if not eps < 0.25:
            raise ValueError(f"step schedule violates epsilon < 1/4 (epsilon={eps})")
        if not delta > eps:
            raise ValueError(f"step schedule violates delta > epsilon (epsilon={eps}, delta={delta})")
        if not delta < 0.5 - eps:
            raise ValueError(
                f"step schedule violates delta < 1/2 - epsilon (epsilon={eps}, delta={delta})"
            )
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "delta", delta)

    def iota(self, k):
        out = _power_step(k, 1.0 - self.epsilon)
        return float(out) if out.ndim == 0 else out

    def c(self, k):
        out = _power_step(k, self.delta)
        return float(out) if out.ndim == 0 else out


def step_schedule(epsilon: float, delta: float) -> StepSchedule:
    return StepSchedule(epsilon, delta)


@dataclass(frozen=True, eq=False)
class GradientEstimate:
    d: np.ndarray
    y_plus: float
    y_minus: float
    delta_vec: np.ndarray


def randomized_difference(
    f: Callable[[np.ndarray, float], float],
    x,
    lam: float,
    c_k: float,
    dist: PerturbationDist,
    rng: np.random.Generator,
) -> GradientEstimate:
    """Estimate the gradient of ``f(., lam)`` at ``x`` from two evaluations.

    ``d_q = (f(x + c Delta) - f(x - c Delta)) / (2 c Delta_q)``.
    """
    if not c_k > 0:
        raise ValueError(f"perturbation size must be positive, got {c_k}")
    x = np.asarray(x, dtype=float).reshape(-1)
    delta_vec = draw_perturbation(dist, x.size, rng)
    y_plus = float(f(x + c_k * delta_vec, lam))
    y_minus = float(f(x - c_k * delta_vec, lam))
    if not (math.isfinite(y_plus) and math.isfinite(y_minus)):
        raise EvaluationError(f"non-finite oracle value (y+={y_plus}, y-={y_minus})")
    d = (y_plus - y_minus) / (2.0 * c_k * delta_vec)
    return GradientEstimate(d, y_plus, y_minus, delta_vec)


@dataclass(frozen=True)
class ScheduleReport:
    """Partial sums over ``k = 0..horizon-1`` and summability flags.

    A series is flagged convergent when its increment over ``(T/2, T]`` is
    smaller than over ``(T/4, T/2]``; for power-law terms ``k^-a`` that ratio
    is ``2^(1-a)``, below one exactly when ``a > 1``.
    """

    horizon: int
    sum_iota: float
    sum_iota_sq: float
    sum_iota_c: float
    sum_ratio_sq: float
    tail_increments: dict
    iota_diverges: bool
    iota_sq_converges: bool
    iota_c_converges: bool
    ratio_sq_converges: bool

    @property
    def ok(self) -> bool:
        return self.iota_diverges and self.iota_sq_converges and self.iota_c_converges


def schedule_diagnostics(s: StepSchedule, horizon: int) -> ScheduleReport:
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    T = max(horizon, 4)
    k = np.arange(T)
    iota, c = s.iota(k), s.c(k)
    terms = {
        "iota": iota,
        "iota_sq": iota**2,
        "iota_c": iota * c,
        "ratio_sq": (iota / c) ** 2,
    }
    sums = {name: float(np.sum(v[:horizon])) for name, v in terms.items()}

    def growth_ratio(v):
        csum = np.cumsum(v)
        late = csum[T - 1] - csum[T // 2 - 1]
        early = csum[T // 2 - 1] - csum[T // 4 - 1]
        return late / early

    ratios = {name: growth_ratio(v) for name, v in terms.items()}
    nxt = float(horizon)
    tails = {
        "iota": s.iota(nxt),
        "iota_sq": s.iota(nxt) ** 2,
        "iota_c": s.iota(nxt) * s.c(nxt),
        "ratio_sq": (s.iota(nxt) / s.c(nxt)) ** 2,
    }
    return ScheduleReport(
        horizon=horizon,
        sum_iota=sums["iota"],
        sum_iota_sq=sums["iota_sq"],
        sum_iota_c=sums["iota_c"],
        sum_ratio_sq=sums["ratio_sq"],
        tail_increments=tails,
        iota_diverges=ratios["iota"] >= 1.0,
        iota_sq_converges=ratios["iota_sq"] < 1.0,
        iota_c_converges=ratios["iota_c"] < 1.0,
        ratio_sq_converges=ratios["ratio_sq"] < 1.0,
    )
