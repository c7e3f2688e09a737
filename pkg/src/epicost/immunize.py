"""One-shot immunization: random removal, degree truncation, social cost, ER optimum."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np

from .cost import er_exact_cost
from .degree_dist import DistributionSpec, sample_weights, truncate
from .epidemic import EpidemicParams
from .errors import DegenerateRegimeError, InstabilityError
from .graph import Graph


@dataclass(frozen=True)
class ImmunizationPlan:
    """``scheme='random'`` immunizes a fraction ``value`` of nodes chosen uniformly;
    ``scheme='degree_truncate'`` immunizes every node whose weight exceeds ``value``."""

    scheme: Literal["random", "degree_truncate"]
    value: float
    c_v: float

    def __post_init__(self):
        if self.scheme == "random":
            if not 0.0 <= self.value <= 1.0:
                raise ValueError(f"immunized fraction must lie in [0, 1], got {self.value}")
        elif self.scheme == "degree_truncate":
            if not self.value > 0:
                raise ValueError(f"cut-off weight must be positive, got {self.value}")
        else:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not self.c_v > 0:
            raise ValueError(f"immunization cost must be positive, got {self.c_v}")


@dataclass(frozen=True)
class ImmunizedProblem:
    """What is left after immunization: ``n`` survivors whose weights follow ``dist``.

    ``dist`` is None when nobody survives.
    """

    dist: DistributionSpec | None
    n: int
    n_original: int

    @property
    def immunized_fraction(self) -> float:
        return (self.n_original - self.n) / self.n_original

    def sample_weights(self, seed: int) -> np.ndarray:
        if self.dist is None or self.n == 0:
            return np.empty(0)
        return sample_weights(self.dist, self.n, seed)


def _tail_probability(dist: DistributionSpec, w_cut: float) -> float:
    if dist.continuous:
        return float(dist.survival(w_cut))
    if hasattr(dist, "array"):
        return float(np.mean(dist.array > w_cut))
    return 1.0 if dist.support()[0] > w_cut else 0.0


def apply_immunization(dist: DistributionSpec, n: int, plan: ImmunizationPlan) -> ImmunizedProblem:
    """Transform the population before the graph is drawn.

    Random: floor(pi n) nodes removed; survivors keep the edge probabilities
    of the full graph, which for an expected-degree model means their
    weights shrink by the surviving fraction (an ER graph G(n, p) becomes
    G(n~, p)).  Truncation: weights conditioned on w <= w_cut, the expected
    number of nodes above the cut removed.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if plan.scheme == "random":
        removed = math.floor(plan.value * n)
        survivors = n - removed
        if survivors == 0:
            return ImmunizedProblem(None, 0, n)
        return ImmunizedProblem(dist.scaled(survivors / n), survivors, n)
    q = _tail_probability(dist, plan.value)
    removed = math.floor(q * n)
    if removed >= n:
        return ImmunizedProblem(None, 0, n)
    return ImmunizedProblem(truncate(dist, plan.value), n - removed, n)


def delete_random_nodes(g: Graph, pi: float, seed: int) -> Graph:
    """Remove floor(pi n) uniformly chosen nodes from a fixed graph."""
    if not 0.0 <= pi <= 1.0:
        raise ValueError("pi must lie in [0, 1]")
    rng = np.random.default_rng(int(seed))
    removed = math.floor(pi * g.n)
    keep = np.sort(rng.permutation(g.n)[removed:])
    return g.subgraph(keep)


def social_cost(pi: float, n: int, params: EpidemicParams, c_v: float,
                cost_fn: Callable[[int], float]) -> float:
    """pi c_v + (1 - pi) C_D(n~) where ``cost_fn(n~)`` returns the per-node disease cost."""
    if not 0.0 <= pi <= 1.0:
        raise ValueError("pi must lie in [0, 1]")
    survivors = n - math.floor(pi * n)
    if pi == 1.0 or survivors == 0:
        return c_v * pi
    try:
        disease = cost_fn(survivors)
    except InstabilityError as exc:
        raise InstabilityError(exc.lambda_max,
                               f"immunized system unstable at pi={pi}: {exc}") from exc
    return pi * c_v + (1.0 - pi) * disease


def er_social_cost(pi: float, n: int, p: float, params: EpidemicParams, c_v: float) -> float:
    """pi c_v + (1 - pi) alpha c_d / (delta - beta n (1 - pi) p)."""
    if pi == 1.0:
        return c_v
    v_bar = params.beta * n * (1.0 - pi) * p
    try:
        disease = er_exact_cost(v_bar, params.delta, params.alpha, params.cost)
    except InstabilityError as exc:
        raise InstabilityError(exc.lambda_max,
                               f"immunized ER system unstable at pi={pi}") from exc
    return pi * c_v + (1.0 - pi) * disease


def er_optimal_pi(n: int, p: float, params: EpidemicParams, c_v: float
                  ) -> tuple[float, str]:
    """Minimiser of the ER social cost and its regime ('full', 'interior', 'none').

    In units of c_d: a = alpha/delta, b = alpha delta / (delta - beta n p)^2,
    c = c_v / c_d.  The cost is convex in pi with slope c - b at pi = 0 and
    c - a at pi = 1.
    """
    delta, alpha = params.delta, params.alpha
    k = params.beta * n * p
    c = c_v / params.cost
    if not delta > k:
        raise DegenerateRegimeError(
            f"unimmunized ER system is unstable (beta n p = {k:.6g} >= delta = {delta})")
    a = alpha / delta
    b = alpha * delta / (delta - k) ** 2
    if not a < b:
        raise DegenerateRegimeError(f"degenerate regime: a={a:.6g}, b={b:.6g}, c={c:.6g}")
    if c <= a:
        return 1.0, "full"
    if c >= b:
        return 0.0, "none"
    return 1.0 - (delta - math.sqrt(delta * alpha / c)) / k, "interior"
