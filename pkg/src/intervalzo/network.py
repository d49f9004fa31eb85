"""Time-varying doubly stochastic communication graphs.

Agents are indexed from 0 in the API. Edges are ordered pairs ``(j, i)``
meaning agent ``i`` receives from agent ``j``; undirected inputs carry both
orientations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import networkx as nx
import numpy as np

__all__ = [
    "WeightedDigraph",
    "GraphSchedule",
    "TransitionProduct",
    "MixingEstimate",
    "metropolis_weights",
    "fig2_schedule",
    "complete_schedule",
    "ring_schedule",
    "schedule_from_edge_lists",
    "joint_connectivity_check",
    "transition_product",
    "mixing_rate_estimate",
]

STOCHASTIC_TOL = 1e-12
PRODUCT_TOL = 1e-10
EXACT_MIXING_FLOOR = 1e-14


@dataclass(frozen=True, eq=False)
class WeightedDigraph:
    weights: np.ndarray
    edges: frozenset
    eta: float

    def __post_init__(self):
        W = np.array(self.weights, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ValueError("weight matrix must be square")
        n = W.shape[0]
        edges = frozenset((int(j), int(i)) for j, i in self.edges)
        for j, i in edges:
            if not (0 <= i < n and 0 <= j < n) or i == j:
                raise ValueError(f"invalid edge {(j, i)} for {n} agents")
        if np.any(W < 0) or np.any(W > 1):
            raise ValueError("weights must lie in [0, 1]")
        if np.max(np.abs(W.sum(axis=1) - 1)) > STOCHASTIC_TOL:
            raise ValueError("weight matrix rows must sum to 1")
        if np.max(np.abs(W.sum(axis=0) - 1)) > STOCHASTIC_TOL:
            raise ValueError("weight matrix columns must sum to 1")
        eta = float(self.eta)
        # eta == 1 only fits the identity matrix.
        if not 0 < eta <= 1:
            raise ValueError(f"eta must lie in (0, 1], got {eta}")
        mask = np.eye(n, dtype=bool)
        for j, i in edges:
            mask[i, j] = True
        if np.any(W[mask] < eta):
            raise ValueError("diagonal and edge weights must be at least eta")
        if np.any(W[~mask] != 0):
            raise ValueError("weights outside the edge set must be zero")
        W.setflags(write=False)
        object.__setattr__(self, "weights", W)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "eta", eta)

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    def undirected_graph(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.n))
        g.add_edges_from(self.edges)
        return g


@dataclass(frozen=True, eq=False)
class GraphSchedule:
    """Periodic sequence of graphs: ``W(k) = pattern[k % len(pattern)]``.

    Construction verifies joint connectivity for ``kappa`` unless
    ``check_connectivity`` is False (useful only for diagnostics).
    """

    pattern: tuple[WeightedDigraph, ...]
    kappa: int
    eta: float
    check_connectivity: bool = True

    def __post_init__(self):
        pattern = tuple(self.pattern)
        if not pattern:
            raise ValueError("schedule pattern must be non-empty")
        if len({g.n for g in pattern}) != 1:
            raise ValueError("all graphs in a schedule must share the agent count")
        if self.kappa < 1:
            raise ValueError("kappa must be a positive integer")
        if any(g.eta < self.eta for g in pattern):
            raise ValueError("schedule eta exceeds a graph's eta")
        object.__setattr__(self, "pattern", pattern)
        if self.check_connectivity and not joint_connectivity_check(self, self.kappa):
            raise ValueError(f"schedule is not jointly connected over windows of {self.kappa}")

    @property
    def n(self) -> int:
        return self.pattern[0].n

    @property
    def period(self) -> int:
        return len(self.pattern)

    def graph(self, k: int) -> WeightedDigraph:
        return self.pattern[k % self.period]

    def weights(self, k: int) -> np.ndarray:
        return self.pattern[k % self.period].weights


@dataclass(frozen=True, eq=False)
class TransitionProduct:
    psi: np.ndarray
    k: int
    s: int


@dataclass(frozen=True)
class MixingEstimate:
    """Geometric envelope ``mu_hat * beta_hat**k`` of ``max_ij |Psi(k,0)_ij - 1/n|``.

    ``beta_hat`` is the least-squares slope; ``mu_hat`` is the smallest
    intercept that bounds every deviation above the floating-point floor and
    ``mu_ls`` the plain least-squares intercept.
    """

    mu_hat: float
    beta_hat: float
    mu_ls: float
    exact: bool
    deviations: tuple[float, ...]

    @property
    def mixes(self) -> bool:
        return self.exact or self.beta_hat < 1.0


def _undirected(edges: Iterable[Sequence[int]]) -> frozenset:
    return frozenset((int(a), int(b)) for a, b in edges)


def metropolis_weights(n: int, edges: Iterable[Sequence[int]]) -> WeightedDigraph:
    """Metropolis weights ``1 / (1 + max(deg_i, deg_j))`` for a symmetric edge set."""
    if n < 1:
        raise ValueError("n must be at least 1")
    edges = {e for e in _undirected(edges) if e[0] != e[1]}
    if any((b, a) not in edges for a, b in edges):
        raise ValueError("edge set must be symmetric (undirected)")
    deg = np.zeros(n, dtype=int)
    for a, _ in edges:
        deg[a] += 1
    W = np.zeros((n, n))
    for j, i in edges:
        W[i, j] = 1.0 / (1 + max(deg[i], deg[j]))
    W[np.diag_indices(n)] = 1.0 - W.sum(axis=1)
    return WeightedDigraph(W, frozenset(edges), float(W[W > 0].min()))


def _both_ways(pairs):
    return [(a, b) for a, b in pairs] + [(b, a) for a, b in pairs]


def schedule_from_edge_lists(
    n: int,
    edge_lists: Sequence[Iterable[Sequence[int]]],
    kappa: int,
    check_connectivity: bool = True,
) -> GraphSchedule:
    """Metropolis-weighted periodic schedule from undirected 0-based edge lists."""
    pattern = tuple(metropolis_weights(n, _both_ways(edges)) for edges in edge_lists)
    return GraphSchedule(pattern, kappa, min(g.eta for g in pattern), check_connectivity)


# 1-based labels as drawn.
FIG2_EDGES = (
    ((1, 2), (2, 3), (3, 4), (4, 5), (5, 1), (1, 3), (2, 4)),
    ((1, 2), (2, 3), (1, 3)),
    ((2, 3), (3, 4), (2, 4)),
    ((4, 5), (5, 1)),
)


def fig2_schedule() -> GraphSchedule:
    """The cycled four-graph, five-agent schedule (kappa = 4)."""
    lists = [[(a - 1, b - 1) for a, b in graph] for graph in FIG2_EDGES]
    return schedule_from_edge_lists(5, lists, kappa=4)


def complete_schedule(n: int) -> GraphSchedule:
    """Static complete graph with uniform weights ``1/n``."""
    if n == 1:
        return schedule_from_edge_lists(1, [[]], kappa=1)
    pairs = [(a, b) for a in range(n) for b in range(a + 1, n)]
    return schedule_from_edge_lists(n, [pairs], kappa=1)


def ring_schedule(n: int) -> GraphSchedule:
    """Static undirected ring."""
    if n < 3:
        return complete_schedule(n)
    pairs = [(a, (a + 1) % n) for a in range(n)]
    return schedule_from_edge_lists(n, [pairs], kappa=1)


def joint_connectivity_check(schedule: GraphSchedule, kappa: int, strict: bool = False) -> bool:
    """Check every window of ``kappa`` consecutive graphs.

    Default: the union of each window is connected. ``strict=True``: every
    ordered pair of distinct agents is an edge of each window's union.
    """
    if kappa < 1:
        raise ValueError("kappa must be at least 1")
    n = schedule.n
    period = len(schedule.pattern)
    # Windows of a periodic schedule repeat after one period.
    for start in range(period):
        union = set()
        for k in range(start, start + kappa):
            union |= schedule.pattern[k % period].edges
        if strict:
            if len(union) < n * (n - 1):
                return False
        else:
            g = nx.Graph()
            g.add_nodes_from(range(n))
            g.add_edges_from(union)
            if not nx.is_connected(g):
                return False
    return True


def transition_product(schedule: GraphSchedule, k: int, s: int) -> TransitionProduct:
    """``Psi(k, s) = W(k) W(k-1) ... W(s)``."""
    if s < 0 or k < s:
        raise ValueError(f"transition product needs k >= s >= 0, got k={k}, s={s}")
    psi = schedule.weights(s).copy()
    for t in range(s + 1, k + 1):
        psi = schedule.weights(t) @ psi
    return TransitionProduct(psi, k, s)


def _deviation_curve(schedule: GraphSchedule, horizon: int) -> np.ndarray:
    n = schedule.n
    psi = np.eye(n)
    out = np.empty(horizon + 1)
    for k in range(horizon + 1):
        psi = schedule.weights(k) @ psi
        out[k] = np.max(np.abs(psi - 1.0 / n))
    return out


def mixing_rate_estimate(schedule: GraphSchedule, horizon: int) -> MixingEstimate:
    """Fit ``log max_ij |Psi(k,0)_ij - 1/n|`` linearly in ``k`` for ``k <= horizon``.

    Deviations at or below ``1e-14`` are rounding noise and are left out of the
    fit. When nothing is left the schedule mixes exactly.
    """
    if horizon < 10:
        raise ValueError("horizon must be at least 10")
    dev = _deviation_curve(schedule, horizon)
    ks = np.arange(horizon + 1)
    keep = dev > EXACT_MIXING_FLOOR
    if not np.any(keep):
        return MixingEstimate(0.0, 0.0, 0.0, True, tuple(dev))
    if keep.sum() == 1:
        # Single informative point: the slope is undetermined, bound it by the floor.
        k0 = ks[keep][0]
        beta = (EXACT_MIXING_FLOOR / dev[k0]) ** (1.0 / max(1, k0 + 1))
        mu = dev[k0] / beta**k0
        return MixingEstimate(mu, beta, mu, False, tuple(dev))
    slope, intercept = np.polyfit(ks[keep], np.log(dev[keep]), 1)
    beta = float(np.exp(slope))
    mu_ls = float(np.exp(intercept))
    mu = float(np.max(dev[keep] / beta ** ks[keep]))
    return MixingEstimate(mu, beta, mu_ls, False, tuple(dev))
