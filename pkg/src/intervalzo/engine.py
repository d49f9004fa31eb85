"""Distributed stochastic zeroth-order iteration and its instrumentation."""

from __future__ import annotations

import itertools
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .interval_core import Interval, is_pareto_optimal_in
from .network import GraphSchedule, joint_connectivity_check
from .problems import IntervalProblem, scalarized_local
from .zeroth_order import (
    PerturbationDist,
    StepSchedule,
    agent_stream,
    rademacher,
    randomized_difference,
)

__all__ = [
    "ConnectivityError",
    "DivergenceError",
    "AgentState",
    "RunConfig",
    "RunRecord",
    "ReferenceSolution",
    "ParetoPoint",
    "run",
    "run_seeds",
    "reference_solve",
    "regret",
    "regret_curve",
    "pareto_sweep",
    "rate_fit",
]

DIVERGENCE_FACTOR = 1e6


class ConnectivityError(ValueError):
    pass


class DivergenceError(RuntimeError):
    def __init__(self, iteration: int, message: str):
        super().__init__(f"iteration {iteration}: {message}")
        self.iteration = iteration


@dataclass(frozen=True)
class AgentState:
    x: np.ndarray
    lam: float
    stream_key: tuple[int, int]


@dataclass(frozen=True, eq=False)
class RunConfig:
    problem: IntervalProblem
    schedule: GraphSchedule
    steps: StepSchedule
    lambda0: Sequence[float]
    x0: Sequence
    T: int = 500
    dist: PerturbationDist = field(default_factory=rademacher)
    seed: int = 0

    def __post_init__(self):
        n, p = self.problem.n, self.problem.dim
        if self.schedule.n != n:
            raise ValueError(f"schedule has {self.schedule.n} agents, problem has {n}")
        lam0 = np.array(self.lambda0, dtype=float).reshape(-1)
        if lam0.size != n:
            raise ValueError(f"lambda0 needs {n} entries, got {lam0.size}")
        if np.any(lam0 < 0) or np.any(lam0 > 1):
            raise ValueError("lambda0 entries must lie in [0, 1]")
        if not 0 < lam0.mean() < 1:
            raise ValueError("mean of lambda0 must lie strictly inside (0, 1)")
        x0 = np.array(self.x0, dtype=float).reshape(n, p)
        for i, xi in enumerate(x0):
            if not self.problem.constraint.contains(xi, tol=1e-12):
                raise ValueError(f"x0 of agent {i} lies outside the constraint set")
        if int(self.T) < 0:
            raise ValueError("T must be non-negative")
        if int(self.seed) < 0:
            raise ValueError("seed must be non-negative")
        lam0.setflags(write=False)
        x0.setflags(write=False)
        object.__setattr__(self, "lambda0", lam0)
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "T", int(self.T))
        object.__setattr__(self, "seed", int(self.seed))

    def with_seed(self, seed: int) -> "RunConfig":
        return RunConfig(
            self.problem, self.schedule, self.steps, self.lambda0, self.x0, self.T, self.dist, seed
        )


@dataclass(frozen=True)
class ReferenceSolution:
    lambda_star: float
    x_star: np.ndarray
    f_star: float


@dataclass(frozen=True, eq=False)
class RunRecord:
    """Trajectory and per-iteration metrics of one seeded run.

    ``x`` has shape ``(T+1, n, p)`` and ``lam`` shape ``(T+1, n)``. Metric
    arrays have length ``T+1``; ``regret_running[k]`` is the average summed
    gap over iterations ``1..k`` and 0 at ``k = 0``.
    """

    x: np.ndarray
    lam: np.ndarray
    consensus_error: np.ndarray
    lambda_spread: np.ndarray
    optimality_gap: np.ndarray
    regret_running: np.ndarray
    reference: ReferenceSolution
    seed: int

    @property
    def T(self) -> int:
        return self.x.shape[0] - 1

    @property
    def n(self) -> int:
        return self.x.shape[1]

    def x_bar(self, k: Optional[int] = None) -> np.ndarray:
        return self.x.mean(axis=1) if k is None else self.x[k].mean(axis=0)

    def states(self, k: int) -> list[AgentState]:
        return [AgentState(self.x[k, i].copy(), float(self.lam[k, i]), (self.seed, i)) for i in range(self.n)]


@dataclass(frozen=True)
class ParetoPoint:
    lam: float
    x_star: np.ndarray
    value: Interval
    pareto: bool


def _local_objectives(problem: IntervalProblem):
    return [lambda z, l, i=i: scalarized_local(problem, i, z, l) for i in range(problem.n)]


def _summed_objective(problem, x, lam) -> float:
    return float(sum(scalarized_local(problem, i, x[i], lam[i]) for i in range(problem.n)))


def run(config: RunConfig, reference: Optional[ReferenceSolution] = None) -> RunRecord:
    """Run the synchronous consensus / randomized-difference / projection loop.

    Every iteration ``k`` uses ``W(k)`` for all agents: average neighbours'
    states, estimate the local gradient at the averaged point with
    ``f_i(., lambda_i(k))``, take a step of size ``iota(k)``, project, then
    average the weights ``lambda``.
    """
    problem, schedule, steps = config.problem, config.schedule, config.steps
    if not joint_connectivity_check(schedule, schedule.kappa):
        raise ConnectivityError(f"schedule is not jointly connected over windows of {schedule.kappa}")
    n, p, T = problem.n, problem.dim, config.T
    constraint = problem.constraint
    if reference is None:
        reference = reference_solve(problem, float(np.mean(config.lambda0)))
    x_star, f_star = reference.x_star, reference.f_star
    bound = DIVERGENCE_FACTOR * max(constraint.max_norm(), 1.0)
    local = _local_objectives(problem)

    xs = np.empty((T + 1, n, p))
    lams = np.empty((T + 1, n))
    xs[0] = config.x0
    lams[0] = config.lambda0
    gaps = np.zeros(T + 1)

    x = xs[0].copy()
    lam = lams[0].copy()
    for k in range(T):
        W = schedule.weights(k)
        iota_k, c_k = steps.iota(k), steps.c(k)
        xi = W @ x
        x_next = np.empty_like(x)
        for i in range(n):
            est = randomized_difference(local[i], xi[i], lam[i], c_k, config.dist, agent_stream(config.seed, i, k))
            x_next[i] = constraint.project(xi[i] - iota_k * est.d)
        lam = W @ lam
        x = x_next
        if not np.all(np.isfinite(x)) or np.max(np.linalg.norm(x, axis=1)) > bound:
            raise DivergenceError(k + 1, "iterate left the divergence guard")
        xs[k + 1] = x
        lams[k + 1] = lam
        gaps[k + 1] = _summed_objective(problem, x, lam) - f_star

    x_bar = xs.mean(axis=1, keepdims=True)
    consensus_error = np.linalg.norm(xs - x_bar, axis=2).max(axis=1)
    lambda_spread = np.abs(lams - lams.mean(axis=1, keepdims=True)).max(axis=1)
    optimality_gap = np.linalg.norm(x_bar[:, 0, :] - x_star, axis=1)
    regret_running = np.zeros(T + 1)
    if T:
        regret_running[1:] = np.cumsum(gaps[1:]) / np.arange(1, T + 1)
    return RunRecord(xs, lams, consensus_error, lambda_spread, optimality_gap, regret_running, reference, config.seed)


def run_seeds(config: RunConfig, seeds: Sequence[int], workers: int = 1) -> list[RunRecord]:
    """Run one record per seed; results do not depend on ``workers``."""
    reference = reference_solve(config.problem, float(np.mean(config.lambda0)))
    configs = [config.with_seed(s) for s in seeds]
    if workers <= 1:
        return [run(c, reference) for c in configs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda c: run(c, reference), configs))


def _pgd(F, constraint, x, max_iter=2000):
    h = 1e-6
    p = x.size
    fx = F(x)
    t = 1.0
    for _ in range(max_iter):
        g = np.empty(p)
        for q in range(p):
            e = np.zeros(p)
            e[q] = h
            g[q] = (F(x + e) - F(x - e)) / (2 * h)
        while True:
            x_new = constraint.project(x - t * g)
            step = x_new - x
            f_new = F(x_new)
            if f_new <= fx + g @ step + (step @ step) / (2 * t) or t < 1e-14:
                break
            t *= 0.5
        if f_new >= fx:
            break
        moved = np.linalg.norm(step)
        x, fx = x_new, f_new
        t = min(2 * t, 1e6)
        if moved < 1e-13:
            break
    return x, fx


def _grid_points(constraint, lo, hi, per_axis):
    axes = [np.linspace(a, b, per_axis) for a, b in zip(lo, hi)]
    return [constraint.project(np.array(pt)) for pt in itertools.product(*axes)]


def _grid_refine(F, constraint, x, fx):
    lo, hi = constraint.bounding_box()
    per_axis = 201 if x.size == 1 else 41
    for pt in _grid_points(constraint, lo, hi, per_axis):
        v = F(pt)
        if v < fx:
            x, fx = pt, v
    width = float(np.max(hi - lo)) / (per_axis - 1)
    while width > 1e-12:
        for pt in _grid_points(constraint, x - width, x + width, 21):
            v = F(pt)
            if v < fx:
                x, fx = pt, v
        width *= 0.25
    return x, fx


def reference_solve(problem: IntervalProblem, lambda_star: float) -> ReferenceSolution:
    """Minimize ``sum_i f_i(x, lambda_star)`` over the constraint set.

    Projected gradient descent on central differences with backtracking,
    followed by a global-then-shrinking grid search when ``dim <= 2``.
    Fully deterministic.
    """
    if not 0 < lambda_star < 1:
        raise ValueError(f"lambda_star must lie in (0, 1), got {lambda_star}")
    constraint = problem.constraint

    def F(z):
        return float(sum(scalarized_local(problem, i, z, lambda_star) for i in range(problem.n)))

    lo, hi = constraint.bounding_box()
    x = constraint.project((lo + hi) / 2)
    x, fx = _pgd(F, constraint, x)
    if problem.dim <= 2:
        x, fx = _grid_refine(F, constraint, x, fx)
    x = np.array(x, dtype=float)
    x.setflags(write=False)
    return ReferenceSolution(float(lambda_star), x, F(x))


def regret_curve(record: RunRecord, ref: ReferenceSolution, problem: IntervalProblem) -> np.ndarray:
    """``R(t)`` for ``t = 1..T``: average over ``k <= t`` of the summed gap
    ``sum_i f_i(x_i(k), lambda_i(k)) - f_i(x*, lambda*)``."""
    T = record.T
    if T < 1:
        raise ValueError("regret needs at least one iteration")
    f_star = sum(scalarized_local(problem, i, ref.x_star, ref.lambda_star) for i in range(problem.n))
    gaps = np.array([_summed_objective(problem, record.x[k], record.lam[k]) - f_star for k in range(1, T + 1)])
    return np.cumsum(gaps) / np.arange(1, T + 1)


def regret(record: RunRecord, ref: ReferenceSolution, problem: IntervalProblem) -> float:
    return float(regret_curve(record, ref, problem)[-1])


def pareto_sweep(problem: IntervalProblem, lambdas: Sequence[float]) -> list[ParetoPoint]:
    """Solve the scalarized problem for each weight and flag Pareto optimality.

    Each solution's aggregate interval ``sum_i G_i(x*)`` is checked for
    non-dominance against the pooled values of the whole sweep.
    """
    lambdas = [float(l) for l in lambdas]
    if not lambdas:
        raise ValueError("lambda grid must be non-empty")
    if any(not 0 < l < 1 for l in lambdas):
        raise ValueError("lambda grid must lie strictly inside (0, 1)")
    solved = [(l, reference_solve(problem, l).x_star) for l in lambdas]
    values = [problem.total(x) for _, x in solved]
    return [
        ParetoPoint(l, x, v, is_pareto_optimal_in(v, values))
        for (l, x), v in zip(solved, values)
    ]


def rate_fit(regret_curve: Sequence[tuple[float, float]]) -> float:
    """Least-squares slope of ``log R`` against ``log T`` over the tail half.

    Points with ``R <= 0`` cannot be logged; they are dropped with a warning.
    """
    pts = [(float(t), float(r)) for t, r in regret_curve]
    if len(pts) < 10:
        raise ValueError(f"rate fit needs at least 10 points, got {len(pts)}")
    pts.sort()
    tail = pts[len(pts) // 2 :]
    usable = [(t, r) for t, r in tail if r > 0 and t > 0 and math.isfinite(r)]
    dropped = len(tail) - len(usable)
    if dropped:
        warnings.warn(f"rate fit dropped {dropped} non-positive regret values", RuntimeWarning, stacklevel=2)
    if len(usable) < 2:
        raise ValueError("rate fit has fewer than 2 positive regret values in the tail")
    t, r = np.array(usable).T
    slope, _ = np.polyfit(np.log(t), np.log(r), 1)
    return float(slope)
