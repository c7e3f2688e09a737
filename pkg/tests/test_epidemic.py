import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from epicost.cost import linear_cost
from epicost.epidemic import (EpidemicParams, initial_infected_count, iterate_linear,
                              iterate_nonlinear, monte_carlo_cost, simulate_sis)
from epicost.graph import Graph, generate


def exact_sis_cost(A, params):
    """Expected per-node cost of the synchronous SIS chain by solving the absorbing system."""
    n = A.shape[0]
    states = list(itertools.product([0, 1], repeat=n))
    index = {s: i for i, s in enumerate(states)}
    T = np.zeros((len(states), len(states)))
    for s in states:
        x = np.array(s)
        k = A @ x
        p_on = np.where(x == 1, 1 - params.delta, 1 - (1 - params.beta) ** k)
        for t in states:
            y = np.array(t)
            T[index[s], index[t]] = np.prod(np.where(y == 1, p_on, 1 - p_on))
    counts = np.array([sum(s) for s in states], dtype=float)
    transient = [i for i, s in enumerate(states) if sum(s) > 0]
    Q = T[np.ix_(transient, transient)]
    # expected cumulative infected count from each transient state, t = 0 included
    h = np.linalg.solve(np.eye(len(transient)) - Q, counts[transient])
    k0 = initial_infected_count(params.alpha, n)
    starts = [index[s] for s in states if sum(s) == k0]
    pos = {g: i for i, g in enumerate(transient)}
    return params.cost * np.mean([h[pos[s]] for s in starts]) / n


def test_params_validation():
    with pytest.raises(ValueError):
        EpidemicParams(0.0, 0.1, 0.2)
    with pytest.raises(ValueError):
        EpidemicParams(0.5, 1.0, 0.2)
    with pytest.raises(ValueError):
        EpidemicParams(0.5, 0.1, 0.0)
    with pytest.raises(ValueError):
        EpidemicParams(0.5, 0.1, 0.2, cost=-1)
    assert EpidemicParams(0.5, 0.1, 0.2).replace(beta=0.2).beta == 0.2


def test_initial_infected_count_rounds_half_up():
    assert initial_infected_count(0.5, 3) == 2
    assert initial_infected_count(0.2, 2000) == 400
    assert initial_infected_count(0.25, 2) == 1


@pytest.mark.parametrize("graph", ["triangle", "star", "path4"])
def test_monte_carlo_matches_exact_markov_chain(graph, request):
    g = request.getfixturevalue(graph)
    params = EpidemicParams(delta=0.5, beta=0.2, alpha=0.4, cost=2.0)
    exact = exact_sis_cost(g.to_dense(), params)
    mc = monte_carlo_cost(g, params, runs=20000, seed=1)
    assert abs(mc.mean - exact) < 4.5 * mc.stderr
    # the linear model overestimates the true process
    assert linear_cost(g, params).value >= exact - 1e-12


def test_beta_zero_cost_is_geometric_mean():
    g = generate(np.full(500, 4.0), 0)
    params = EpidemicParams(delta=0.25, beta=0.0, alpha=0.5)
    mc = monte_carlo_cost(g, params, runs=400, seed=3)
    assert mc.mean == pytest.approx(0.5 / 0.25, rel=0.02)


def test_sample_path_bookkeeping(triangle):
    params = EpidemicParams(0.3, 0.2, 0.5)
    path = simulate_sis(triangle, params, seed=4)
    assert path.infected_count[0] == 2
    assert path.infected_count[-1] == 0 and not path.truncated
    assert path.duration == len(path.infected_count) - 1
    assert path.realized_cost_per_node == pytest.approx(path.infected_count.sum() / 3)


def test_truncation_is_flagged():
    g = Graph.from_edges(2, [0], [1])
    path = simulate_sis(g, EpidemicParams(0.01, 0.9, 0.5), seed=0, max_steps=5)
    assert path.truncated and path.duration == 5
    mc = monte_carlo_cost(g, EpidemicParams(0.01, 0.9, 0.5), runs=3, seed=0, max_steps=5)
    assert mc.truncated_runs == 3


def test_monte_carlo_reproducible_and_single_run():
    g = generate(np.full(300, 5.0), 2)
    params = EpidemicParams(0.6, 0.05, 0.2)
    a = monte_carlo_cost(g, params, 10, seed=9)
    b = monte_carlo_cost(g, params, 10, seed=9)
    assert np.array_equal(a.costs, b.costs)
    assert monte_carlo_cost(g, params, 1, seed=9).stderr is None
    with pytest.raises(ValueError):
        monte_carlo_cost(g, params, 0, seed=9)


def test_linear_trajectory_sums_to_linear_cost():
    g = generate(np.full(400, 6.0), 3)
    params = EpidemicParams(0.6, 0.04, 0.2)
    traj = iterate_linear(g, params, 400)
    assert traj.mean_P.sum() == pytest.approx(linear_cost(g, params).value, rel=1e-9)


def test_nonlinear_clamping_counted():
    g = Graph.from_edges(3, [0, 1, 2], [1, 2, 0])
    traj = iterate_nonlinear(g, EpidemicParams(0.05, 0.95, 0.9), 3)
    assert traj.clamped > 0
    assert traj.P.min() >= 0 and traj.P.max() <= 1


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), delta=st.floats(0.2, 1.0), frac=st.floats(0.05, 0.95),
       alpha=st.floats(0.05, 0.95))
def test_linear_dominates_nonlinear(seed, delta, frac, alpha):
    g = generate(np.full(60, 4.0), seed)
    lam = max(g.degrees().max(), 1)
    params = EpidemicParams(delta, frac * delta / lam, alpha)
    lin = iterate_linear(g, params, 40).P
    non = iterate_nonlinear(g, params, 40).P
    assert np.all(non <= lin + 1e-12)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_sample_path_counts_are_valid(seed):
    g = generate(np.full(50, 3.0), seed)
    path = simulate_sis(g, EpidemicParams(0.5, 0.1, 0.3), seed)
    assert np.all((path.infected_count >= 0) & (path.infected_count <= 50))
    assert path.infected_count[0] == 15
