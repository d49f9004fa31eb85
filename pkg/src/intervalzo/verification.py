"""Fixed-seed property suites bundled behind ``intervalzo verify``."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .network import (
    PRODUCT_TOL,
    EXACT_MIXING_FLOOR,
    fig2_schedule,
    mixing_rate_estimate,
    transition_product,
)
from .problems import Ball, Box, five_agent_quadratic_problem, scalarized_local
from .zeroth_order import (
    draw_perturbation,
    rademacher,
    randomized_difference,
    schedule_diagnostics,
    step_schedule,
)

__all__ = ["SuiteResult", "SUITES", "run_suites", "projection_violations"]

VERIFY_SEED = 20240611


@dataclass
class SuiteResult:
    name: str
    passed: bool
    details: list[str] = field(default_factory=list)


def projection_violations(constraint, x: np.ndarray, y: np.ndarray, tol: float = 1e-9) -> dict[str, int]:
    """Count failures of the four projection inequalities over row-paired samples."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    px, py = constraint.project(x), constraint.project(y)

    def dot(u, v):
        return np.einsum("ij,ij->i", u, v)

    # P(y) stands in for the arbitrary point of the set.
    y_in = py
    a = dot(x - px, y_in - px) > tol
    b = np.linalg.norm(px - py, axis=1) > np.linalg.norm(x - y, axis=1) + tol
    c = dot(x - y, py - px) > -dot(px - py, px - py) + tol
    d = dot(x - px, x - px) + dot(y_in - px, y_in - px) > dot(x - y_in, x - y_in) + tol
    idem = np.any(constraint.project(px) != px, axis=1)
    return {
        "a": int(a.sum()),
        "b": int(b.sum()),
        "c": int(c.sum()),
        "d": int(d.sum()),
        "idempotence": int(idem.sum()),
    }


def projection_suite(samples: int = 10_000) -> SuiteResult:
    rng = np.random.default_rng(VERIFY_SEED)
    sets = {
        "ball": Ball(rng.normal(size=3), 1.5),
        "box": Box([-1.0, 0.0, 2.0], [1.0, 0.5, 4.0]),
    }
    result = SuiteResult("projection", True)
    for name, constraint in sets.items():
        x = rng.normal(scale=3.0, size=(samples, constraint.dim))
        y = rng.normal(scale=3.0, size=(samples, constraint.dim))
        counts = projection_violations(constraint, x, y)
        ok = not any(counts.values())
        result.passed &= ok
        result.details.append(f"{name}: {samples} pairs, violations {counts}")
    return result


def mixing_suite(horizon: int = 200) -> SuiteResult:
    schedule = fig2_schedule()
    est = mixing_rate_estimate(schedule, horizon)
    dev = np.array(est.deviations)
    ks = np.arange(dev.size)
    above = dev > EXACT_MIXING_FLOOR
    envelope_ok = bool(np.all(dev[above] <= 1.1 * est.mu_hat * est.beta_hat ** ks[above]))
    psi = transition_product(schedule, horizon, 0).psi
    stochastic_ok = bool(
        np.max(np.abs(psi.sum(axis=0) - 1)) <= PRODUCT_TOL and np.max(np.abs(psi.sum(axis=1) - 1)) <= PRODUCT_TOL
    )
    ok = est.beta_hat < 1 and dev[horizon] < 1e-6 and envelope_ok and stochastic_ok
    return SuiteResult(
        "mixing",
        ok,
        [
            f"fig2: beta_hat={est.beta_hat:.6g}, mu_hat={est.mu_hat:.6g}, deviation at k={horizon}: {dev[horizon]:.3g}",
            f"envelope holds: {envelope_ok}; product doubly stochastic: {stochastic_ok}",
        ],
    )


def moments_suite(samples: int = 100_000) -> SuiteResult:
    rng = np.random.default_rng(VERIFY_SEED)
    dist = rademacher()
    draws = draw_perturbation(dist, samples, rng)
    inv_mean = float(np.mean(1.0 / draws))
    mean_ok = abs(inv_mean) <= 0.01

    problem = five_agent_quadratic_problem()
    p = problem.dim
    bound = p * dist.bound_M1 * dist.inv_bound_M2 * problem.lipschitz_hint
    steps = step_schedule(0.125, 0.25)
    norms = []
    for s in range(2000):
        i = s % problem.n
        x = rng.uniform(-100.0, 100.0, size=p)
        lam = rng.uniform()
        c_k = steps.c(s % 500)

        def f(z, l, i=i):
            return scalarized_local(problem, i, problem.constraint.project(z), l)

        est = randomized_difference(f, x, lam, c_k, dist, rng)
        norms.append(np.linalg.norm(est.d))
    norms = np.array(norms)
    first, second = float(norms.mean()), float((norms**2).mean())
    bounds_ok = first <= bound and second <= bound**2
    report = schedule_diagnostics(steps, 10_000)
    return SuiteResult(
        "moments",
        mean_ok and bounds_ok and report.ok,
        [
            f"mean of 1/Delta over {samples} draws: {inv_mean:.3g} (|.| <= 0.01)",
            f"E||d|| = {first:.4g}, E||d||^2 = {second:.4g}, bound {bound:.4g} / {bound**2:.4g}",
            f"step sums at T=1e4: iota {report.sum_iota:.4g}, iota^2 {report.sum_iota_sq:.4g}, "
            f"iota*c {report.sum_iota_c:.4g}; summability pattern ok: {report.ok}",
        ],
    )


def estimator_suite(samples: int = 100_000) -> SuiteResult:
    rng = np.random.default_rng(VERIFY_SEED)
    dist = rademacher()
    a, b, e = 1.7, -0.4, 3.0
    worst = 0.0
    steps = step_schedule(0.125, 0.25)
    for x in np.linspace(-5, 5, 101):
        for c_k in steps.c(np.array([0, 10, 100, 1000])):
            est = randomized_difference(lambda z, l: a * z[0] ** 2 + b * z[0] + e, [x], 0.5, c_k, dist, rng)
            worst = max(worst, abs(est.d[0] - (2 * a * x + b)))
    exact_ok = worst <= 1e-12

    A = np.diag([1.0, 2.0, 0.5, 3.0, 1.5])
    x0 = np.array([1.0, -0.5, 2.0, 0.0, 0.3])
    grad = 2 * A @ x0
    c_k = 0.1

    def f(z, l):
        return float(z @ A @ z)

    d = np.array([randomized_difference(f, x0, 0.5, c_k, dist, rng).d for _ in range(samples)])
    mean, se = d.mean(axis=0), d.std(axis=0, ddof=1) / np.sqrt(samples)
    unbiased_ok = bool(np.all(np.abs(mean - grad) <= 3 * se))
    return SuiteResult(
        "estimator",
        exact_ok and unbiased_ok,
        [
            f"1-D quadratic: max |d - f'(x)| = {worst:.3g} (<= 1e-12)",
            f"5-D quadratic: max |mean - grad| / se = {np.max(np.abs(mean - grad) / se):.3g} (<= 3)",
        ],
    )


SUITES: dict[str, Callable[[], SuiteResult]] = {
    "projection": projection_suite,
    "mixing": mixing_suite,
    "moments": moments_suite,
    "estimator": estimator_suite,
}


def run_suites(names=None) -> list[SuiteResult]:
    names = list(SUITES) if not names else list(names)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise KeyError(f"unknown suite(s): {', '.join(unknown)}")
    return [SUITES[n]() for n in names]
