import numpy as np
import pytest
from hypothesis import example, given, settings, strategies as st

from intervalzo.interval_core import Interval
from intervalzo.problems import (
    Ball,
    Box,
    IntervalProblem,
    ParametricIntervalSpec,
    designed_pareto_problem,
    five_agent_quadratic_problem,
    parametric_interval_problem,
    project,
    quadratic_interval_problem,
    scalarized_local,
    two_term_exponential_family,
)
from intervalzo.verification import projection_violations


@pytest.fixture(scope="module")
def five():
    return five_agent_quadratic_problem()


class TestScalarizedLocal:
    def test_agent_centred_at_three(self, five):
        assert scalarized_local(five, 0, [0.0], 0.5) == 11.25

    def test_weight_one_is_lower_endpoint(self, five):
        for i in range(five.n):
            for x in (-7.0, 0.3, 42.0):
                assert scalarized_local(five, i, [x], 1.0) == five.agents[i]([x]).lo

    @pytest.mark.parametrize("lam", [0.0, 0.3, 1.0])
    def test_zero_at_own_center(self, five, lam):
        assert scalarized_local(five, 2, [1.0], lam) == 0.0

    def test_bad_agent_index(self, five):
        with pytest.raises(IndexError):
            scalarized_local(five, 5, [0.0], 0.5)

    def test_bad_weight(self, five):
        with pytest.raises(ValueError):
            scalarized_local(five, 0, [0.0], 1.2)


class TestProject:
    def test_ball_clamps_to_radius(self):
        assert project(Ball([0.0], 100.0), [150.0]).tolist() == [100.0]

    def test_ball_interior_fixed(self):
        assert project(Ball([0.0], 100.0), [37.0]).tolist() == [37.0]

    def test_box_clamps(self):
        assert project(Box([0.0], [3.0]), [-1.0]).tolist() == [0.0]

    def test_scalar_input_promoted(self):
        assert project(Box([0.0], [3.0]), 5.0).tolist() == [3.0]

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension mismatch"):
            project(Ball([0.0, 0.0], 1.0), [1.0, 2.0, 3.0])

    def test_invalid_sets(self):
        with pytest.raises(ValueError):
            Ball([0.0], 0.0)
        with pytest.raises(ValueError):
            Box([1.0], [0.0])

    @pytest.mark.parametrize(
        "constraint",
        [Ball([0.5, -1.0, 2.0], 1.5), Box([-1.0, 0.0, 2.0], [1.0, 0.5, 4.0]), Ball([0.0], 100.0)],
        ids=["ball3", "box3", "ball1"],
    )
    def test_projection_inequalities(self, constraint):
        rng = np.random.default_rng(11)
        scale = 3.0 * max(1.0, constraint.max_norm())
        x = rng.normal(scale=scale, size=(10_000, constraint.dim))
        y = rng.normal(scale=scale, size=(10_000, constraint.dim))
        counts = projection_violations(constraint, x, y, tol=1e-9)
        assert counts == {"a": 0, "b": 0, "c": 0, "d": 0, "idempotence": 0}

    @settings(max_examples=200)
    @given(st.lists(st.floats(-1e4, 1e4), min_size=3, max_size=3))
    @example([-9999.0, -9999.0, -9999.0])
    def test_idempotent_exactly(self, pt):
        for c in (Ball([0.1, 0.2, -0.3], 2.5), Box([-1, -1, -1], [1, 2, 3])):
            once = c.project(np.array(pt))
            assert np.array_equal(c.project(once), once)
            assert c.contains(once)

    def test_batch_matches_single(self):
        rng = np.random.default_rng(3)
        ball = Ball([1.0, 2.0], 0.7)
        pts = rng.normal(scale=4, size=(50, 2))
        batch = ball.project(pts)
        for row, out in zip(pts, batch):
            assert np.array_equal(ball.project(row), out)


class TestQuadratic:
    def test_five_agent_instance(self, five):
        assert five.n == 5 and five.dim == 1
        assert isinstance(five.constraint, Ball) and five.constraint.radius == 100.0
        for i, rho in enumerate((3, 2, 1, 0, -1)):
            assert five.agents[i]([0.0]) == Interval(0.5 * rho**2, 2.0 * rho**2)

    def test_zero_interval_at_center(self):
        prob = quadratic_interval_problem(Interval(0.5, 2), [[1.0, -2.0]], Ball([0, 0], 10))
        assert prob.agents[0]([1.0, -2.0]) == Interval(0.0, 0.0)

    def test_degenerate_coefficient(self):
        prob = quadratic_interval_problem(Interval(1, 1), [[0.0], [2.0]], Box([-5], [5]))
        for x in np.linspace(-5, 5, 11):
            g = prob.agents[1]([x])
            assert g.lo == g.hi == (x - 2.0) ** 2

    def test_rejects_nonpositive_lower_coefficient(self):
        with pytest.raises(ValueError, match="positive"):
            quadratic_interval_problem(Interval(0.0, 2.0), [[0.0]], Ball([0.0], 1.0))

    def test_lipschitz_hint(self, five):
        # 2 * coeff.hi * (radius + max |rho|)
        assert five.lipschitz_hint == 2 * 2.0 * (100 + 3)

    def test_lipschitz_sanity(self, five):
        rng = np.random.default_rng(5)
        L = five.lipschitz_hint
        for _ in range(2000):
            x1, x2 = rng.uniform(-100, 100, size=2)
            lam = rng.uniform()
            i = rng.integers(5)
            diff = abs(scalarized_local(five, i, [x1], lam) - scalarized_local(five, i, [x2], lam))
            assert diff <= L * abs(x1 - x2) + 1e-9

    @pytest.mark.parametrize("which", ["quadratic", "designed"])
    def test_midpoint_convexity(self, five, which):
        prob = five if which == "quadratic" else designed_pareto_problem()
        lo, hi = prob.constraint.bounding_box()
        rng = np.random.default_rng(8)
        for _ in range(2000):
            x1, x2 = rng.uniform(lo, hi), rng.uniform(lo, hi)
            lam = rng.uniform()
            i = rng.integers(prob.n)
            mid = scalarized_local(prob, i, (x1 + x2) / 2, lam)
            avg = (scalarized_local(prob, i, x1, lam) + scalarized_local(prob, i, x2, lam)) / 2
            assert mid <= avg + 1e-12 * max(1.0, abs(avg))


class TestParametric:
    def test_single_coefficient(self):
        spec = ParametricIntervalSpec((Interval(1, 2),), lambda C, x: C[:, 0] * x[0] ** 2, dim=1)
        assert parametric_interval_problem(spec)([2.0]) == Interval(4.0, 8.0)

    def test_constant_family_degenerate(self):
        spec = ParametricIntervalSpec((Interval(-3, 5),), lambda C, x: 0 * C[:, 0] + x[0], dim=1)
        g = parametric_interval_problem(spec)([1.25])
        assert g.is_degenerate and g.lo == 1.25

    def test_two_term_exponential_family(self):
        unit = Interval(0, 1)
        spec = ParametricIntervalSpec((unit, unit, unit), two_term_exponential_family, dim=2)
        g = parametric_interval_problem(spec)([1.0, 0.0])
        assert g == Interval(0.0, 2.0)

    def test_grid_resolution_validated(self):
        with pytest.raises(ValueError):
            ParametricIntervalSpec((Interval(0, 1),), two_term_exponential_family, dim=2, grid_points_per_coeff=1)

    def test_default_grid_has_eleven_points_per_axis(self):
        unit = Interval(0, 1)
        spec = ParametricIntervalSpec((unit, unit, unit), two_term_exponential_family, dim=2)
        assert spec.grid().shape == (11**3, 3)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(-3, 3), st.floats(-3, 3))
    def test_lower_never_exceeds_upper(self, x1, x2):
        spec = ParametricIntervalSpec(
            (Interval(-1, 2), Interval(0.5, 1.5), Interval(-0.5, 0.5)), two_term_exponential_family, dim=2,
            grid_points_per_coeff=5,
        )
        g = parametric_interval_problem(spec)([x1, x2])
        assert g.lo <= g.hi

    def test_brute_force_agreement(self):
        boxes = (Interval(-1, 2), Interval(0.5, 1.5), Interval(-0.5, 0.5))
        spec = ParametricIntervalSpec(boxes, two_term_exponential_family, dim=2, grid_points_per_coeff=4)
        fn = parametric_interval_problem(spec)
        x = np.array([0.7, -1.3])
        vals = []
        for t1 in np.linspace(0, 1, 4):
            for t2 in np.linspace(0, 1, 4):
                for t3 in np.linspace(0, 1, 4):
                    c = [(1 - t) * b.lo + t * b.hi for t, b in zip((t1, t2, t3), boxes)]
                    vals.append(c[0] * x[0] ** 2 + c[1] * x[0] * np.exp(c[2] * x[1]))
        g = fn(x)
        assert g.lo == pytest.approx(min(vals), rel=1e-14)
        assert g.hi == pytest.approx(max(vals), rel=1e-14)


class TestDesignedPareto:
    def test_shape(self):
        prob = designed_pareto_problem()
        assert prob.n == 1 and prob.dim == 1
        assert prob.agents[0]([1.0]).lo == 0.0 and prob.agents[0]([3.0]).hi == 5.0

    @pytest.mark.parametrize("lam,x_star", [(0.5, 2.0), (1.0, 1.0), (0.0, 3.0)])
    def test_minimizer_by_dense_scan(self, lam, x_star):
        prob = designed_pareto_problem()
        xs = np.linspace(0, 3, 30001)
        vals = [scalarized_local(prob, 0, [x], lam) for x in xs]
        assert xs[int(np.argmin(vals))] == pytest.approx(x_star, abs=1e-4)


def test_problem_dim_mismatch():
    prob = five_agent_quadratic_problem()
    with pytest.raises(ValueError):
        IntervalProblem(prob.agents, Ball([0.0, 0.0], 1.0))
