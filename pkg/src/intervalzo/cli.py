"""Batch experiment runner: ``intervalzo run | pareto | verify``.

Exit codes: 0 success, 1 failed verification suite, 2 invalid config or
arguments, 3 divergence guard tripped.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np
import yaml

from . import engine
from .interval_core import Interval
from .network import (
    GraphSchedule,
    complete_schedule,
    fig2_schedule,
    ring_schedule,
    schedule_from_edge_lists,
)
from .problems import (
    Ball,
    Box,
    ConstraintSet,
    IntervalProblem,
    designed_pareto_problem,
    five_agent_quadratic_problem,
    quadratic_interval_problem,
)
from .verification import SUITES, run_suites
from .zeroth_order import PerturbationDist, StepSchedule

log = logging.getLogger("intervalzo")

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_DIVERGED = 3

OUTPUT_ENV = "INTERVALZO_OUTPUT_DIR"
DEFAULT_OUTPUT = "intervalzo_out"

# Thresholds behind the summary flags.
LAMBDA_TOL = 1e-6
X_BAR_TOL = 0.1
CONSENSUS_TOL = 0.05
RATE_SLOPE_MAX = -0.05


class ConfigError(ValueError):
    pass


def fmt(v: float) -> str:
    """17 significant digits: parsing the text gives back the same double."""
    return format(float(v), ".17g")


# config parsing -------------------------------------------------------------

TOP_KEYS = {
    "problem", "schedule", "epsilon", "delta", "T", "seeds", "lambda0", "x0",
    "perturbation", "output_dir", "lambda_grid", "workers",
}


def _check_keys(section: str, data: dict, allowed: set):
    if not isinstance(data, dict):
        raise ConfigError(f"{section} must be a mapping")
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {section}: {', '.join(unknown)}")


def _constraint_from(data: dict) -> ConstraintSet:
    _check_keys("problem.constraint", data, {"kind", "center", "radius", "lower", "upper"})
    kind = data.get("kind")
    if kind == "ball":
        return Ball(data["center"], data["radius"])
    if kind == "box":
        return Box(data["lower"], data["upper"])
    raise ConfigError(f"problem.constraint.kind must be 'ball' or 'box', got {kind!r}")


def _problem_from(data: dict) -> IntervalProblem:
    _check_keys("problem", data, {"preset", "coeff", "centers", "constraint"})
    preset = data.get("preset", "quadratic")
    if preset == "five_agent_quadratic":
        if set(data) - {"preset"}:
            raise ConfigError("preset five_agent_quadratic takes no parameters; use preset 'quadratic'")
        return five_agent_quadratic_problem()
    if preset == "designed_pareto":
        if set(data) - {"preset"}:
            raise ConfigError("preset designed_pareto takes no parameters")
        return designed_pareto_problem()
    if preset == "quadratic":
        for key in ("coeff", "centers", "constraint"):
            if key not in data:
                raise ConfigError(f"problem.{key} is required for preset 'quadratic'")
        lo, hi = data["coeff"]
        return quadratic_interval_problem(Interval(lo, hi), data["centers"], _constraint_from(data["constraint"]))
    raise ConfigError(f"unknown problem preset {preset!r}")


def _schedule_from(data: dict, n: int) -> GraphSchedule:
    _check_keys("schedule", data, {"preset", "n", "edges", "kappa"})
    if "edges" in data:
        if "preset" in data:
            raise ConfigError("schedule takes either a preset or explicit edges, not both")
        return schedule_from_edge_lists(data.get("n", n), data["edges"], int(data.get("kappa", len(data["edges"]))))
    preset = data.get("preset", "complete")
    size = int(data.get("n", n))
    if preset == "fig2":
        return fig2_schedule()
    if preset == "complete":
        return complete_schedule(size)
    if preset == "ring":
        return ring_schedule(size)
    raise ConfigError(f"unknown schedule preset {preset!r}")


def _dist_from(data: dict) -> PerturbationDist:
    _check_keys("perturbation", data, {"kind", "a"})
    return PerturbationDist(data.get("kind", "rademacher"), data.get("a", 1.0))


@dataclass
class ExperimentConfig:
    problem: IntervalProblem
    schedule: GraphSchedule
    steps: StepSchedule
    dist: PerturbationDist
    T: int
    seeds: list[int]
    lambda0: Optional[list[float]]
    x0: np.ndarray
    output_dir: Optional[str]
    lambda_grid: list[float]
    workers: int
    raw: dict = field(default_factory=dict)

    def run_config(self) -> engine.RunConfig:
        if self.lambda0 is None:
            raise ConfigError("lambda0 is required to run")
        return engine.RunConfig(
            self.problem, self.schedule, self.steps, self.lambda0, self.x0, self.T, self.dist, self.seeds[0]
        )


def parse_config(data: dict) -> ExperimentConfig:
    """Validate a config mapping; every problem surfaces as :class:`ConfigError`."""
    _check_keys("config", data, TOP_KEYS)
    try:
        if "problem" not in data:
            raise ConfigError("config needs a 'problem' section")
        problem = _problem_from(data["problem"])
        schedule = _schedule_from(data.get("schedule", {}), problem.n)
        if schedule.n != problem.n:
            raise ConfigError(f"schedule has {schedule.n} agents but problem has {problem.n}")
        steps = StepSchedule(data.get("epsilon", 0.125), data.get("delta", 0.25))
        dist = _dist_from(data.get("perturbation", {}))
        T = data.get("T", 500)
        if not isinstance(T, int) or T < 0:
            raise ConfigError("T must be a non-negative integer")
        seeds = data.get("seeds", list(range(10)))
        if not seeds or any(not isinstance(s, int) or s < 0 for s in seeds):
            raise ConfigError("seeds must be a non-empty list of non-negative integers")
        lambda0 = data.get("lambda0")
        if "x0" in data:
            x0 = np.array(data["x0"], dtype=float).reshape(problem.n, problem.dim)
        else:
            x0 = np.tile(problem.constraint.project(np.zeros(problem.dim)), (problem.n, 1))
        grid = [float(v) for v in data.get("lambda_grid", [round(0.1 * k, 10) for k in range(1, 10)])]
        workers = int(data.get("workers", 1))
        cfg = ExperimentConfig(
            problem, schedule, steps, dist, T, list(seeds), lambda0, x0,
            data.get("output_dir"), grid, workers, dict(data),
        )
        if lambda0 is not None:
            cfg.run_config()
        _check_grid(cfg.lambda_grid)
        return cfg
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError, IndexError) as exc:
        raise ConfigError(str(exc)) from exc


def _check_grid(grid):
    if not grid:
        raise ConfigError("lambda grid must be non-empty")
    if any(not 0 < v < 1 for v in grid):
        raise ConfigError("lambda grid values must lie strictly inside (0, 1)")


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    if data is None:
        data = {}
    return parse_config(data)


def _output_dir(cli_out: Optional[str], cfg: ExperimentConfig) -> Path:
    out = cli_out or cfg.output_dir or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


# outputs --------------------------------------------------------------------

def write_trajectory_csv(record: engine.RunRecord, path: Path) -> None:
    p = record.x.shape[2]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "agent", *[f"x_{q}" for q in range(p)], "lambda", "consensus_err", "regret_running"])
        for k in range(record.T + 1):
            ce, rr = fmt(record.consensus_error[k]), fmt(record.regret_running[k])
            for i in range(record.n):
                w.writerow([k, i, *map(fmt, record.x[k, i]), fmt(record.lam[k, i]), ce, rr])


def read_trajectory_csv(path) -> dict[str, np.ndarray]:
    """Load a trajectory CSV back into arrays keyed like the record fields."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    xcols = [c for c in rows[0] if c.startswith("x_")]
    T = max(int(r["iter"]) for r in rows)
    n = max(int(r["agent"]) for r in rows) + 1
    x = np.empty((T + 1, n, len(xcols)))
    lam = np.empty((T + 1, n))
    ce = np.empty(T + 1)
    rr = np.empty(T + 1)
    for r in rows:
        k, i = int(r["iter"]), int(r["agent"])
        x[k, i] = [float(r[c]) for c in xcols]
        lam[k, i] = float(r["lambda"])
        ce[k] = float(r["consensus_err"])
        rr[k] = float(r["regret_running"])
    return {"x": x, "lam": lam, "consensus_error": ce, "regret_running": rr}


def summary_checks(
    x_final: np.ndarray,
    lam_final: np.ndarray,
    consensus_final: np.ndarray,
    regret_curves: np.ndarray,
    reference: engine.ReferenceSolution,
) -> tuple[dict, Optional[float]]:
    """Pass/fail flags from final states and regret curves only.

    ``x_final`` is ``(seeds, n, p)``, ``lam_final`` ``(seeds, n)``,
    ``consensus_final`` ``(seeds,)`` and ``regret_curves`` ``(seeds, T+1)``.
    """
    x_bar_mean = x_final.mean(axis=(0, 1))
    lam_dev = float(np.max(np.abs(lam_final - reference.lambda_star)))
    x_dev = float(np.linalg.norm(x_bar_mean - reference.x_star))
    cons = float(consensus_final.mean())
    mean_curve = regret_curves.mean(axis=0)
    T = mean_curve.size - 1
    slope = None
    if T >= 10:
        pts = [(t, mean_curve[t]) for t in range(1, T + 1)]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            try:
                slope = engine.rate_fit(pts)
            except ValueError:
                slope = None
    early = max(1, T // 10)
    checks = {
        "lambda_consensus": {"value": lam_dev, "threshold": LAMBDA_TOL, "pass": lam_dev <= LAMBDA_TOL},
        "x_bar_near_reference": {"value": x_dev, "threshold": X_BAR_TOL, "pass": x_dev <= X_BAR_TOL},
        "consensus_error": {"value": cons, "threshold": CONSENSUS_TOL, "pass": cons < CONSENSUS_TOL},
        "regret_decreasing": {
            "value": [float(mean_curve[early]), float(mean_curve[T])] if T >= 1 else None,
            "iterations": [early, T],
            "pass": bool(T >= 10 and mean_curve[T] < mean_curve[early]),
        },
        "regret_rate": {
            "value": slope,
            "threshold": RATE_SLOPE_MAX,
            "pass": slope is not None and slope <= RATE_SLOPE_MAX,
        },
    }
    return checks, slope


def build_summary(cfg: ExperimentConfig, records: Sequence[engine.RunRecord]) -> dict:
    ref = records[0].reference
    x_final = np.array([r.x[-1] for r in records])
    lam_final = np.array([r.lam[-1] for r in records])
    cons = np.array([r.consensus_error[-1] for r in records])
    curves = np.array([r.regret_running for r in records])
    checks, slope = summary_checks(x_final, lam_final, cons, curves, ref)
    return {
        "problem": cfg.problem.name,
        "T": cfg.T,
        "seeds": [r.seed for r in records],
        "reference": {
            "lambda_star": ref.lambda_star,
            "x_star": ref.x_star.tolist(),
            "f_star": ref.f_star,
        },
        "per_seed": [
            {
                "seed": r.seed,
                "x_final": r.x[-1].tolist(),
                "lambda_final": r.lam[-1].tolist(),
                "x_bar_final": r.x_bar(r.T).tolist(),
                "consensus_error_final": float(r.consensus_error[-1]),
                "regret_final": float(r.regret_running[-1]),
            }
            for r in records
        ],
        "seed_mean": {
            "x_bar_final": x_final.mean(axis=(0, 1)).tolist(),
            "lambda_mean_final": float(lam_final.mean()),
            "consensus_error_final": float(cons.mean()),
            "regret_final": float(curves[:, -1].mean()),
        },
        "rate_slope": slope,
        "checks": checks,
    }


# commands -------------------------------------------------------------------

def cmd_run(config_path, out: Optional[str] = None, seeds: Optional[Sequence[int]] = None) -> int:
    try:
        cfg = load_config(config_path)
        if seeds:
            cfg.seeds = list(seeds)
        base = cfg.run_config()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = _output_dir(out, cfg)
    try:
        records = engine.run_seeds(base, cfg.seeds, workers=cfg.workers)
    except engine.DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    for rec in records:
        write_trajectory_csv(rec, out_dir / f"trajectory_{rec.seed}.csv")
    summary = build_summary(cfg, records)
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    sm = summary["seed_mean"]
    print(
        f"{len(records)} seed(s), T={cfg.T}: lambda mean {sm['lambda_mean_final']:.3f}, "
        f"x_bar {np.round(sm['x_bar_final'], 3).tolist()}, consensus error {sm['consensus_error_final']:.3g}, "
        f"R(T) {sm['regret_final']:.4g}"
    )
    for name, check in summary["checks"].items():
        print(f"  [{'PASS' if check['pass'] else 'FAIL'}] {name}")
    print(f"wrote {out_dir}")
    return EXIT_OK


def cmd_pareto(config_path, lambda_grid: Optional[Sequence[float]] = None, out: Optional[str] = None) -> int:
    try:
        cfg = load_config(config_path)
        grid = list(lambda_grid) if lambda_grid is not None else cfg.lambda_grid
        _check_grid(grid)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = _output_dir(out, cfg)
    points = engine.pareto_sweep(cfg.problem, grid)
    p = cfg.problem.dim
    with open(out_dir / "pareto_front.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lambda", *[f"x_{q}" for q in range(p)], "G_lo", "G_hi", "pareto_flag"])
        for pt in points:
            w.writerow([fmt(pt.lam), *map(fmt, pt.x_star), fmt(pt.value.lo), fmt(pt.value.hi), str(pt.pareto).lower()])
    flagged = sum(pt.pareto for pt in points)
    print(f"{len(points)} weights, {flagged} Pareto optimal; wrote {out_dir / 'pareto_front.csv'}")
    return EXIT_OK


def cmd_verify(suites: Optional[Sequence[str]] = None) -> int:
    try:
        results = run_suites(suites)
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return EXIT_CONFIG
    for res in results:
        print(f"[{'PASS' if res.passed else 'FAIL'}] {res.name}")
        for line in res.details:
            print(f"    {line}")
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"failed suites: {', '.join(failed)}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="intervalzo", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run seeded experiments and write CSV trajectories + summary.json")
    p_run.add_argument("config_path", nargs="?")
    p_run.add_argument("--config", dest="config_flag")
    p_run.add_argument("--out", help=f"output directory (default: config output_dir, ${OUTPUT_ENV}, ./{DEFAULT_OUTPUT})")
    p_run.add_argument("--seeds", type=_int_list, help="comma-separated seed override")

    p_par = sub.add_parser("pareto", help="sweep scalarization weights and write pareto_front.csv")
    p_par.add_argument("config_path", nargs="?")
    p_par.add_argument("--config", dest="config_flag")
    p_par.add_argument("--out")
    p_par.add_argument("--lambdas", type=_float_list, help="comma-separated weight grid override")

    p_ver = sub.add_parser("verify", help="run the bundled property suites")
    p_ver.add_argument("--suite", action="append", choices=sorted(SUITES), help="run only this suite (repeatable)")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "verify":
        return cmd_verify(args.suite)
    path = args.config_flag or args.config_path
    if path is None:
        parser.error("a config path is required")
    if args.command == "run":
        return cmd_run(path, out=args.out, seeds=args.seeds)
    return cmd_pareto(path, lambda_grid=args.lambdas, out=args.out)


if __name__ == "__main__":
    sys.exit(main())
