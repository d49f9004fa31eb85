"""Compact real intervals, their quasi-orderings, and weighted scalarization."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Union

import numpy as np

__all__ = [
    "Interval",
    "ScalarizationWeight",
    "IntervalFn",
    "leq_L",
    "leq_U",
    "leq",
    "strictly_dominates",
    "scalarize",
    "scalarize_bounds",
    "is_pareto_optimal_in",
]


@dataclass(frozen=True)
class Interval:
    """A non-empty compact interval ``[lo, hi]``.

    Degenerate intervals (``lo == hi``) are allowed. Construction with
    ``lo > hi`` raises instead of swapping the endpoints.
    """

    lo: float
    hi: float

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ValueError(f"interval endpoints must be finite, got [{lo}, {hi}]")
        if lo > hi:
            raise ValueError(f"interval requires lo <= hi, got [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def is_degenerate(self) -> bool:
        return self.lo == self.hi

    def __iter__(self):
        yield self.lo
        yield self.hi

    def __repr__(self):
        return f"Interval({self.lo!r}, {self.hi!r})"


@dataclass(frozen=True)
class ScalarizationWeight:
    """Weight ``lam`` in ``[0, 1]`` placed on the lower endpoint."""

    lam: float

    def __post_init__(self):
        lam = float(self.lam)
        if not 0.0 <= lam <= 1.0:
            raise ValueError(f"scalarization weight must lie in [0, 1], got {lam}")
        object.__setattr__(self, "lam", lam)

    @property
    def is_interior(self) -> bool:
        """True for ``0 < lam < 1``, the case where scalar minimizers are Pareto optimal."""
        return 0.0 < self.lam < 1.0

    def __float__(self):
        return self.lam


WeightLike = Union[float, ScalarizationWeight]


@dataclass(frozen=True)
class IntervalFn:
    """Interval-valued map ``x -> [L(x), R(x)]`` on ``R^dim``.

    ``bounds`` returns the pair ``(L(x), R(x))`` for a 1-D point array; calling
    the object wraps the pair in an :class:`Interval`, which validates
    ``L(x) <= R(x)``.
    """

    bounds: Callable[[np.ndarray], tuple[float, float]]
    dim: int

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ValueError(f"dim must be positive, got {self.dim}")

    def __call__(self, x) -> Interval:
        x = np.asarray(x, dtype=float).reshape(self.dim)
        lo, hi = self.bounds(x)
        return Interval(lo, hi)

    def lower(self, x) -> float:
        return self(x).lo

    def upper(self, x) -> float:
        return self(x).hi


def leq_L(a: Interval, b: Interval) -> bool:
    return a.lo <= b.lo


def leq_U(a: Interval, b: Interval) -> bool:
    return a.hi <= b.hi


def leq(a: Interval, b: Interval) -> bool:
    """Componentwise weak order: both endpoints of ``a`` at most those of ``b``."""
    return a.lo <= b.lo and a.hi <= b.hi


def strictly_dominates(a: Interval, b: Interval) -> bool:
    """``a`` is below ``b`` in both endpoints with at least one strict inequality."""
    return (a.lo < b.lo and a.hi <= b.hi) or (a.lo <= b.lo and a.hi < b.hi)


def scalarize(g: Interval, w: WeightLike) -> float:
    """Return ``w * g.lo + (1 - w) * g.hi``."""
    return scalarize_bounds(g.lo, g.hi, float(w))


def scalarize_bounds(lo: float, hi: float, lam: float) -> float:
    """:func:`scalarize` on raw endpoints, validating both the pair and the weight."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"scalarization weight must lie in [0, 1], got {lam}")
    if not lo <= hi:
        raise ValueError(f"interval requires lo <= hi, got [{lo}, {hi}]")
    value = lam * lo + (1.0 - lam) * hi
    # Rounding can push the convex combination a hair outside the endpoints.
    return min(max(value, lo), hi)


def is_pareto_optimal_in(candidate_value: Interval, pool: Iterable[Interval]) -> bool:
    """Check that no pool member improves on ``candidate_value``.

    A member ``v`` improves on the candidate when ``leq(v, candidate)`` holds
    but ``leq(candidate, v)`` does not.
    """
    pool = list(pool)
    if not pool:
        raise ValueError("pool must be non-empty")
    for v in pool:
        if leq(v, candidate_value) and not leq(candidate_value, v):
            return False
    return True
