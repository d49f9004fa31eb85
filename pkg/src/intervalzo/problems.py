"""Distributed interval problems, convex constraint sets and their projections."""

from __future__ import annotations

import abc
import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .interval_core import Interval, IntervalFn, scalarize_bounds

__all__ = [
    "ConstraintSet",
    "Ball",
    "Box",
    "IntervalProblem",
    "ParametricIntervalSpec",
    "project",
    "scalarized_local",
    "quadratic_interval_problem",
    "parametric_interval_problem",
    "two_term_exponential_family",
    "designed_pareto_problem",
    "five_agent_quadratic_problem",
]


class ConstraintSet(abc.ABC):
    """Non-empty, compact, convex subset of ``R^dim`` with a Euclidean projection.

    Subclass and implement :meth:`project`, :meth:`contains` and
    :meth:`bounding_box` to plug in another set. Only balls and boxes ship.
    """

    dim: int

    @abc.abstractmethod
    def project(self, x: np.ndarray) -> np.ndarray:
        ...

    @abc.abstractmethod
    def contains(self, x: np.ndarray, tol: float = 0.0) -> bool:
        ...

    @abc.abstractmethod
    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        ...

    def distance(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        return float(np.linalg.norm(x - self.project(x)))

    def max_norm(self) -> float:
        """Upper bound on ``||x||`` over the set."""
        lo, hi = self.bounding_box()
        return float(np.linalg.norm(np.maximum(np.abs(lo), np.abs(hi))))


@dataclass(frozen=True, eq=False)
class Ball(ConstraintSet):
    center: np.ndarray
    radius: float

    def __post_init__(self):
        center = np.array(self.center, dtype=float).reshape(-1)
        center.setflags(write=False)
        object.__setattr__(self, "center", center)
        if not np.all(np.isfinite(center)):
            raise ValueError("ball center must be finite")
        if not float(self.radius) > 0:
            raise ValueError(f"ball radius must be positive, got {self.radius}")
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self) -> int:
        return self.center.size

    def _dist(self, x):
        # One formula for project and contains, so boundary points agree to the ulp.
        return np.linalg.norm(x - self.center, axis=-1, keepdims=True)

    def project(self, x):
        """Project a point, or each row of a 2-D array."""
        x = np.asarray(x, dtype=float)
        offset = x - self.center
        dist = self._dist(x)
        outside = dist > self.radius
        if not np.any(outside):
            return x.copy()
        scale = np.where(outside, self.radius / np.where(outside, dist, 1.0), 1.0)
        out = self.center + offset * scale
        # Pull rounding overshoot back inside so projecting again is a no-op.
        over = self._dist(out) > self.radius
        while np.any(over):
            out = np.where(over, np.nextafter(out, self.center), out)
            over = self._dist(out) > self.radius
        return out

    def contains(self, x, tol=0.0):
        return bool(np.all(self._dist(np.asarray(x, dtype=float)) <= self.radius + tol))

    def bounding_box(self):
        return self.center - self.radius, self.center + self.radius

    def __repr__(self):
        return f"Ball(center={self.center.tolist()}, radius={self.radius})"


@dataclass(frozen=True, eq=False)
class Box(ConstraintSet):
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.array(self.lower, dtype=float).reshape(-1)
        upper = np.array(self.upper, dtype=float).reshape(-1)
        if lower.shape != upper.shape:
            raise ValueError("box bounds must have the same dimension")
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise ValueError("box bounds must be finite")
        if np.any(lower > upper):
            raise ValueError("box requires lower <= upper componentwise")
        lower.setflags(write=False)
        upper.setflags(write=False)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self) -> int:
        return self.lower.size

    def project(self, x):
        """Project a point, or each row of a 2-D array."""
        return np.clip(np.asarray(x, dtype=float), self.lower, self.upper)

    def contains(self, x, tol=0.0):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def bounding_box(self):
        return self.lower.copy(), self.upper.copy()

    def __repr__(self):
        return f"Box(lower={self.lower.tolist()}, upper={self.upper.tolist()})"


def project(constraint: ConstraintSet, x) -> np.ndarray:
    """Euclidean projection of ``x`` onto ``constraint``."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.shape != (constraint.dim,):
        raise ValueError(f"dimension mismatch: point has shape {x.shape}, set has dim {constraint.dim}")
    return constraint.project(x)


@dataclass(frozen=True)
class IntervalProblem:
    """Per-agent interval objectives ``G_i`` sharing one constraint set.

    ``lipschitz_hint`` is diagnostic metadata only; the optimizer never reads it.
    """

    agents: tuple[IntervalFn, ...]
    constraint: ConstraintSet
    lipschitz_hint: Optional[float] = None
    name: str = "custom"

    def __post_init__(self):
        agents = tuple(self.agents)
        if not agents:
            raise ValueError("problem needs at least one agent")
        dims = {g.dim for g in agents}
        if dims != {self.constraint.dim}:
            raise ValueError(f"agent dims {sorted(dims)} do not match constraint dim {self.constraint.dim}")
        object.__setattr__(self, "agents", agents)

    @property
    def n(self) -> int:
        return len(self.agents)

    @property
    def dim(self) -> int:
        return self.constraint.dim

    def total(self, x) -> Interval:
        """Aggregate interval ``sum_i G_i(x)`` at a common point."""
        values = [g(x) for g in self.agents]
        return Interval(sum(v.lo for v in values), sum(v.hi for v in values))


def scalarized_local(problem: IntervalProblem, agent: int, x, lam: float) -> float:
    """Local objective ``lam * L_i(x) + (1 - lam) * R_i(x)``."""
    if not 0 <= agent < problem.n:
        raise IndexError(f"agent index {agent} out of range for {problem.n} agents")
    g = problem.agents[agent]
    x = np.asarray(x, dtype=float).reshape(g.dim)
    lo, hi = g.bounds(x)
    return scalarize_bounds(float(lo), float(hi), float(lam))


def quadratic_interval_problem(
    coeff: Interval, centers: Sequence, constraint: ConstraintSet
) -> IntervalProblem:
    """Agents ``G_i(x) = [coeff.lo, coeff.hi] * ||x - center_i||^2``.

    Requires ``coeff.lo > 0`` so both endpoint functions stay convex.
    """
    if coeff.lo <= 0:
        raise ValueError(f"coefficient lower bound must be positive, got {coeff.lo}")
    centers = [np.array(c, dtype=float).reshape(-1) for c in centers]
    if not centers:
        raise ValueError("need at least one center")
    for c in centers:
        if c.shape != (constraint.dim,):
            raise ValueError(f"center {c.tolist()} does not match constraint dim {constraint.dim}")

    a, b = coeff.lo, coeff.hi

    def make(center):
        def bounds(x):
            r = x - center
            sq = float(r @ r)
            return a * sq, b * sq

        return IntervalFn(bounds, constraint.dim)

    radius = constraint.max_norm()
    hint = 2.0 * b * (radius + max(float(np.linalg.norm(c)) for c in centers))
    return IntervalProblem(tuple(make(c) for c in centers), constraint, lipschitz_hint=hint, name="quadratic")


@dataclass(frozen=True)
class ParametricIntervalSpec:
    """Family ``g_c(x)`` whose coefficients range over a box of intervals.

    ``family_eval(C, x)`` receives the coefficient grid ``C`` with one row per
    grid point and must return one value per row.
    """

    coefficient_boxes: tuple[Interval, ...]
    family_eval: Callable[[np.ndarray, np.ndarray], np.ndarray]
    dim: int
    grid_points_per_coeff: int = 11

    def __post_init__(self):
        object.__setattr__(self, "coefficient_boxes", tuple(self.coefficient_boxes))
        if not self.coefficient_boxes:
            raise ValueError("need at least one coefficient box")
        if self.grid_points_per_coeff < 2:
            raise ValueError("grid_points_per_coeff must be at least 2")

    def grid(self) -> np.ndarray:
        t = np.linspace(0.0, 1.0, self.grid_points_per_coeff)
        axes = [(1 - t) * box.lo + t * box.hi for box in self.coefficient_boxes]
        return np.array(list(itertools.product(*axes)), dtype=float)


def parametric_interval_problem(spec: ParametricIntervalSpec) -> IntervalFn:
    """Interval function with ``L``/``R`` the min/max of the family over the coefficient grid."""
    grid = spec.grid()

    def bounds(x):
        values = np.asarray(spec.family_eval(grid, x), dtype=float).reshape(-1)
        return float(values.min()), float(values.max())

    return IntervalFn(bounds, spec.dim)


def two_term_exponential_family(C: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``c1 * x1^2 + c2 * x1 * exp(c3 * x2)`` evaluated for every coefficient row."""
    return C[:, 0] * x[0] ** 2 + C[:, 1] * x[0] * np.exp(C[:, 2] * x[1])


def designed_pareto_problem() -> IntervalProblem:
    """Single agent on ``[0, 3]`` with ``L = (x-1)^2`` and ``R = (x-3)^2 + 5``.

    The scalarized minimizer is ``3 - 2 * lam`` and the Pareto set is ``[1, 3]``.
    """

    def bounds(x):
        v = float(x[0])
        return (v - 1.0) ** 2, (v - 3.0) ** 2 + 5.0

    # L <= R on [0, 3]: R - L = 13 - 4x >= 1.
    return IntervalProblem(
        (IntervalFn(bounds, 1),), Box([0.0], [3.0]), lipschitz_hint=6.0, name="designed_pareto"
    )


FIVE_AGENT_CENTERS = (3.0, 2.0, 1.0, 0.0, -1.0)


def five_agent_quadratic_problem() -> IntervalProblem:
    """Five scalar agents with ``[0.5, 2] * (x - rho_i)^2`` on ``|x| <= 100``."""
    problem = quadratic_interval_problem(
        Interval(0.5, 2.0), [[c] for c in FIVE_AGENT_CENTERS], Ball([0.0], 100.0)
    )
    return IntervalProblem(problem.agents, problem.constraint, problem.lipschitz_hint, name="five_agent_quadratic")
