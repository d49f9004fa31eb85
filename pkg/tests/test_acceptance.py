"""End-to-end acceptance checks, each at its stated tolerance and time budget."""

import time
import warnings

import numpy as np
import pytest

from intervalzo.engine import RunConfig, pareto_sweep, rate_fit, run_seeds
from intervalzo.network import PRODUCT_TOL, fig2_schedule, mixing_rate_estimate, transition_product
from intervalzo.problems import Ball, Box, designed_pareto_problem, five_agent_quadratic_problem
from intervalzo.verification import projection_violations
from intervalzo.zeroth_order import agent_stream, rademacher, randomized_difference, step_schedule
from intervalzo.cli import main

LAMBDA0 = (0.1, 0.3, 0.5, 0.7, 0.9)


def experiment(T):
    return RunConfig(
        five_agent_quadratic_problem(), fig2_schedule(), step_schedule(0.125, 0.25), LAMBDA0, [[0.0]] * 5, T=T
    )


@pytest.mark.criterion(1, "five-agent experiment: lambda -> 0.5, seed-mean x_bar(500) in [0.9, 1.1], < 5 s")
def test_five_agent_reproduction():
    start = time.perf_counter()
    records = run_seeds(experiment(500), range(20))
    elapsed = time.perf_counter() - start
    for rec in records:
        assert np.max(np.abs(rec.lam[500] - 0.5)) <= 1e-6
    x_bar = float(np.mean([rec.x_bar(500)[0] for rec in records]))
    assert 0.9 <= x_bar <= 1.1, x_bar
    assert elapsed < 5.0, f"{elapsed:.2f} s"


@pytest.mark.criterion(2, "Pareto front: x*(lambda) within 1e-3 of 3 - 2 lambda, all non-dominated, < 2 s")
def test_pareto_front_recovery():
    grid = [k / 10 for k in range(1, 10)]
    start = time.perf_counter()
    points = pareto_sweep(designed_pareto_problem(), grid)
    elapsed = time.perf_counter() - start
    assert max(abs(p.x_star[0] - (3 - 2 * p.lam)) for p in points) < 1e-3
    assert all(p.pareto for p in points)
    assert elapsed < 2.0, f"{elapsed:.2f} s"


@pytest.mark.criterion(3, "estimator: exact on 1-D quadratics, unbiased at p=5 over 1e5 draws, < 5 s")
def test_estimator_exact_and_unbiased():
    start = time.perf_counter()
    dist = rademacher()
    steps = step_schedule(0.125, 0.25)
    a, b, e = 1.7, -0.4, 3.0
    worst = 0.0
    for k in range(0, 2000, 7):
        x = -5 + 10 * k / 2000
        est = randomized_difference(lambda z, l: a * z[0] ** 2 + b * z[0] + e, [x], 0.5, steps.c(k), dist, agent_stream(1, 0, k))
        worst = max(worst, abs(est.d[0] - (2 * a * x + b)))
    assert worst <= 1e-12, worst

    A = np.array([1.0, 2.0, 0.5, 3.0, 1.5])
    x0 = np.array([1.0, -0.5, 2.0, 0.0, 0.3])
    rng = np.random.default_rng(2024)
    f = lambda z, l: float(np.sum(A * z * z))
    d = np.array([randomized_difference(f, x0, 0.5, 0.1, dist, rng).d for _ in range(100_000)])
    se = d.std(axis=0, ddof=1) / np.sqrt(d.shape[0])
    assert np.all(np.abs(d.mean(axis=0) - 2 * A * x0) <= 3 * se)
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0, f"{elapsed:.2f} s"


@pytest.mark.criterion(4, "mixing: deviation < 1e-6 by k=200, fitted envelope with beta_hat < 1, < 1 s")
def test_mixing():
    start = time.perf_counter()
    schedule = fig2_schedule()
    est = mixing_rate_estimate(schedule, 200)
    dev = np.array(est.deviations)
    ks = np.arange(dev.size)
    above = dev > 1e-14
    psi = transition_product(schedule, 200, 0).psi
    elapsed = time.perf_counter() - start
    assert dev[200] < 1e-6
    assert est.beta_hat < 1
    assert np.all(dev[above] <= 1.1 * est.mu_hat * est.beta_hat ** ks[above])
    assert np.max(np.abs(psi.sum(axis=0) - 1)) <= PRODUCT_TOL
    assert elapsed < 1.0, f"{elapsed:.2f} s"


@pytest.mark.criterion(5, "projection: four inequalities within 1e-9 and exact idempotence, ball and box, < 1 s")
def test_projection_contracts():
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    for constraint in (Ball([0.3, -1.2, 0.5], 2.0), Box([-1.0, 0.0, -3.0], [1.0, 2.0, -1.0])):
        x = rng.normal(scale=4.0, size=(10_000, 3))
        y = rng.normal(scale=4.0, size=(10_000, 3))
        counts = projection_violations(constraint, x, y, tol=1e-9)
        assert not any(counts.values()), counts
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0, f"{elapsed:.2f} s"


@pytest.mark.criterion(6, "consensus: 10-seed mean error < 0.05 at T=500 and below its T=50 value")
def test_consensus():
    records = run_seeds(experiment(500), range(10))
    late = np.mean([r.consensus_error[500] for r in records])
    early = np.mean([r.consensus_error[50] for r in records])
    assert late < 0.05 and late < early, (early, late)


@pytest.mark.criterion(7, "regret trend: 10-seed mean curve on [100, 5000] has slope <= -0.05 and R(5000) < R(100), < 60 s")
def test_regret_trend():
    start = time.perf_counter()
    records = run_seeds(experiment(5000), range(10))
    mean = np.mean([r.regret_running for r in records], axis=0)
    points = [(t, mean[t]) for t in range(100, 5001)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        try:
            slope = rate_fit(points)
        except ValueError as exc:
            slope = None
            reason = str(exc)
    elapsed = time.perf_counter() - start
    detail = f"R(100)={mean[100]:.4g}, R(5000)={mean[5000]:.4g}, slope={slope}"
    assert elapsed < 60.0, f"{elapsed:.2f} s"
    assert slope is not None, f"no slope: {reason}; {detail}"
    assert slope <= -0.05, detail
    assert mean[5000] < mean[100], detail


@pytest.mark.criterion(8, "determinism: equal seeds give byte-identical trajectory CSVs")
def test_determinism(tmp_path):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text(
        "problem: {preset: five_agent_quadratic}\n"
        "schedule: {preset: fig2}\n"
        "T: 200\nseeds: [0, 11]\n"
        "lambda0: [0.1, 0.3, 0.5, 0.7, 0.9]\n"
    )
    cfg2d = tmp_path / "cfg2d.yaml"
    cfg2d.write_text(
        "problem:\n  preset: quadratic\n  coeff: [0.5, 2.0]\n"
        "  centers: [[1, 0], [0, 1], [-1, 0]]\n"
        "  constraint: {kind: ball, center: [0, 0], radius: 1.5}\n"
        "schedule: {preset: ring}\nT: 200\nseeds: [2]\nlambda0: [0.2, 0.5, 0.8]\nworkers: 2\n"
    )
    for config, seeds in ((cfg, (0, 11)), (cfg2d, (2,))):
        for out in ("a", "b"):
            assert main(["run", str(config), "--out", str(tmp_path / config.stem / out)]) == 0
        for s in seeds:
            first = (tmp_path / config.stem / "a" / f"trajectory_{s}.csv").read_bytes()
            second = (tmp_path / config.stem / "b" / f"trajectory_{s}.csv").read_bytes()
            assert first == second
