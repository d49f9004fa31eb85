"""Distributed zeroth-order optimization of interval-valued objectives over time-varying networks."""

from .interval_core import (
    Interval,
    IntervalFn,
    ScalarizationWeight,
    is_pareto_optimal_in,
    leq,
    leq_L,
    leq_U,
    scalarize,
    strictly_dominates,
)

__version__ = "0.1.0"
