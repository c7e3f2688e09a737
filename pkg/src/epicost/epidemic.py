"""Discrete-time SIS dynamics: exact stochastic process and the two mean-field models."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import Graph
from .seeding import child_seed

DEFAULT_MAX_STEPS = 100_000


@dataclass(frozen=True)
class EpidemicParams:
    """Recovery probability, infection probability, initial infected fraction, cost per step."""

    delta: float
    beta: float
    alpha: float
    cost: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.delta <= 1.0:
            raise ValueError(f"delta must lie in (0, 1], got {self.delta}")
        if not 0.0 <= self.beta < 1.0:
            raise ValueError(f"beta must lie in [0, 1), got {self.beta}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not (self.cost > 0 and math.isfinite(self.cost)):
            raise ValueError(f"cost per step must be positive, got {self.cost}")

    def replace(self, **changes) -> "EpidemicParams":
        fields = dict(delta=self.delta, beta=self.beta, alpha=self.alpha, cost=self.cost)
        fields.update(changes)
        return EpidemicParams(**fields)


def initial_infected_count(alpha: float, n: int) -> int:
    """round(alpha * n) with halves rounded up."""
    return int(math.floor(alpha * n + 0.5))


@dataclass(frozen=True)
class SamplePath:
    infected_count: np.ndarray
    n: int
    cost: float
    truncated: bool

    @property
    def duration(self) -> int:
        """Steps taken after t = 0 (until extinction, or the cap when truncated)."""
        return len(self.infected_count) - 1

    @property
    def realized_cost_per_node(self) -> float:
        return self.cost * float(self.infected_count.sum()) / self.n


def simulate_sis(g: Graph, params: EpidemicParams, seed: int,
                 max_steps: int = DEFAULT_MAX_STEPS) -> SamplePath:
    """One sample path of the synchronous SIS process.

    Each step reads only the time-t state: an infected node recovers w.p.
    delta, a susceptible node with k infected neighbours is infected w.p.
    1 - (1 - beta)**k.  A node that recovers cannot be reinfected in the same
    step.
    """
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    rng = np.random.default_rng(int(seed))
    n = g.n
    infected = np.zeros(n, dtype=bool)
    k0 = initial_infected_count(params.alpha, n)
    infected[rng.choice(n, size=k0, replace=False)] = True
    counts = [k0]
    log_escape = math.log1p(-params.beta) if params.beta > 0 else 0.0
    A = g.adjacency
    steps = 0
    while counts[-1] > 0 and steps < max_steps:
        # one uniform per node: infected nodes use it to recover, susceptible ones to get infected
        u = rng.random(n)
        if params.beta > 0:
            pressure = A @ infected.astype(float)
            p_inf = -np.expm1(pressure * log_escape)
            newly = ~infected & (u < p_inf)
        else:
            newly = np.zeros(n, dtype=bool)
        stays = infected & (u >= params.delta)
        infected = stays | newly
        counts.append(int(infected.sum()))
        steps += 1
    return SamplePath(np.asarray(counts, dtype=np.int64), n, params.cost,
                      truncated=counts[-1] > 0)


@dataclass(frozen=True)
class MonteCarloResult:
    mean: float
    stderr: float | None
    truncated_runs: int
    costs: np.ndarray

    @property
    def runs(self) -> int:
        return len(self.costs)


def monte_carlo_cost(g: Graph, params: EpidemicParams, runs: int, seed: int,
                     max_steps: int = DEFAULT_MAX_STEPS) -> MonteCarloResult:
    """Mean realised per-node cost over ``runs`` independent paths.

    Run ``r`` uses ``child_seed(seed, r)``.  Truncated paths are kept, so a
    non-zero ``truncated_runs`` means the mean is a lower bound.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    costs = np.empty(runs)
    truncated = 0
    for r in range(runs):
        path = simulate_sis(g, params, child_seed(seed, r), max_steps)
        costs[r] = path.realized_cost_per_node
        truncated += path.truncated
    stderr = float(costs.std(ddof=1) / math.sqrt(runs)) if runs > 1 else None
    return MonteCarloResult(float(costs.mean()), stderr, truncated, costs)


@dataclass(frozen=True)
class Trajectory:
    """Infection probabilities P[t, i] for t = 0..T."""

    P: np.ndarray
    clamped: int = 0

    @property
    def mean_P(self) -> np.ndarray:
        return self.P.mean(axis=1)


def iterate_nonlinear(g: Graph, params: EpidemicParams, T: int) -> Trajectory:
    """P_i(t+1) = (1-delta) P_i + beta (1 - P_i) sum_{j~i} P_j, clipped to [0, 1]."""
    if T < 0:
        raise ValueError("T must be >= 0")
    P = np.empty((T + 1, g.n))
    P[0] = params.alpha
    clamped = 0
    for t in range(T):
        p = P[t]
        nxt = (1.0 - params.delta) * p + params.beta * (1.0 - p) * (g.adjacency @ p)
        out = (nxt < 0.0) | (nxt > 1.0)
        if out.any():
            clamped += int(out.sum())
            nxt = np.clip(nxt, 0.0, 1.0)
        P[t + 1] = nxt
    return Trajectory(P, clamped)


def iterate_linear(g: Graph, params: EpidemicParams, T: int) -> Trajectory:
    """P(t+1) = [(1-delta) I + beta A] P(t), no clipping."""
    if T < 0:
        raise ValueError("T must be >= 0")
    P = np.empty((T + 1, g.n))
    P[0] = params.alpha
    for t in range(T):
        P[t + 1] = (1.0 - params.delta) * P[t] + params.beta * (g.adjacency @ P[t])
    return Trajectory(P)


def path_rows(path: SamplePath):
    """CSV rows (t, infected_count)."""
    return [(t, int(c)) for t, c in enumerate(path.infected_count)]


def trajectory_rows(traj: Trajectory):
    """CSV rows (t, mean_P)."""
    return [(t, float(m)) for t, m in enumerate(traj.mean_P)]
