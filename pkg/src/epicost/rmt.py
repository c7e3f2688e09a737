"""Dense empirical checks of the resolvent machinery behind the asymptotic cost.

Everything here builds n x n dense matrices, so n is capped at ``DENSE_CAP``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from .cost import solve_fixed_point_F
from .degree_dist import DEFAULT_QUAD_TOL, DistributionSpec, ScaledDistribution, sample_weights
from .errors import DenseCapError, InstabilityError
from .graph import generate
from .seeding import child_seed

DENSE_CAP = 4000


def _check_cap(n: int) -> None:
    if n > DENSE_CAP:
        raise DenseCapError(f"n = {n} exceeds the dense cap {DENSE_CAP}")


@dataclass(frozen=True, eq=False)
class RmtSample:
    """One graph draw in dense form with its weights and infection rate."""

    A: np.ndarray
    w: np.ndarray
    beta: float
    seed: int | None = None
    v: np.ndarray = field(init=False, repr=False)
    mu: float = field(init=False)

    def __post_init__(self):
        _check_cap(self.A.shape[0])
        if not np.all(self.w > 0):
            raise ValueError("weights must be positive")
        v = self.beta * self.w
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "mu", 1.0 / v.sum() if self.beta > 0 else math.inf)

    @property
    def n(self) -> int:
        return self.A.shape[0]


def draw_sample(dist: DistributionSpec, beta: float, n: int, seed: int) -> RmtSample:
    """Sample weights and an expected-degree graph (child seeds 0 and 1 of ``seed``)."""
    _check_cap(n)
    w = sample_weights(dist, n, child_seed(seed, 0))
    g = generate(w, child_seed(seed, 1))
    return RmtSample(g.to_dense(), w, beta, seed)


def build_wigner_C(sample: RmtSample) -> np.ndarray:
    """C = (n rho)^{-1/2} W^{-1/2} (A - rho w w^T) W^{-1/2}, rho = 1 / sum(w)."""
    w = sample.w
    rho = 1.0 / w.sum()
    s = 1.0 / np.sqrt(w)
    centred = sample.A - rho * np.outer(w, w)
    return centred * np.outer(s, s) / math.sqrt(sample.n * rho)


def build_X(sample: RmtSample, delta: float) -> np.ndarray:
    """X = delta I - beta A + mu v v^T."""
    X = -sample.beta * sample.A
    X[np.diag_indices_from(X)] += delta
    if sample.beta > 0:
        X += sample.mu * np.outer(sample.v, sample.v)
    return X


def _cholesky(S: np.ndarray, what: str):
    try:
        return la.cho_factor(S, lower=True, check_finite=False)
    except la.LinAlgError:
        raise InstabilityError(math.nan, f"{what} is not positive definite") from None


def lemma1_terms(sample: RmtSample, delta: float) -> tuple[float, float, float]:
    """((1/n) 1'X^-1 1, (1/n) 1'X^-1 v, (1/n) v'X^-1 v) by a dense Cholesky solve."""
    n = sample.n
    # X - mu v v' = delta I - beta A must be positive definite for a stable epidemic
    base = -sample.beta * sample.A
    base[np.diag_indices_from(base)] += delta
    _cholesky(base, "delta I - beta A")
    factor = _cholesky(build_X(sample, delta), "X")
    ones = np.ones(n)
    sol = la.cho_solve(factor, np.column_stack([ones, sample.v]), check_finite=False)
    t11 = ones @ sol[:, 0] / n
    t1v = ones @ sol[:, 1] / n
    tvv = sample.v @ sol[:, 1] / n
    return float(t11), float(t1v), float(tvv)


def lemma1_limits(dist: ScaledDistribution, delta: float, kappa: float,
                  tol: float = DEFAULT_QUAD_TOL) -> tuple[float, float, float]:
    """Large-n limits of the three quadratic forms: (S1, F, S2) / delta.

    S1 = E[v^-1 / (v^-1 - k^2 F)] = 1 + k^2 F^2 and S2 = E[v / (v^-1 - k^2 F)],
    which equals E v^2 at kappa = 0 and (1 - vbar/F) / k^2 otherwise.
    """
    fp = solve_fixed_point_F(dist, kappa, tol)
    F = fp.F
    k2 = kappa * kappa
    s1 = 1.0 + k2 * F * F
    s2 = fp.second_moment if kappa == 0 else (1.0 - fp.v_bar / F) / k2
    return s1 / delta, F / delta, s2 / delta


def s_integrals(dist: ScaledDistribution, kappa: float, F: float,
                tol: float = DEFAULT_QUAD_TOL) -> tuple[float, float]:
    """(S1, S2) evaluated directly by quadrature at the given F."""
    k2 = kappa * kappa
    s1 = dist.integrate(lambda v: 1.0 / (1.0 - k2 * F * v), tol)
    s2 = dist.integrate(lambda v: v * v / (1.0 - k2 * F * v), tol)
    return s1, s2


def kappa_n(beta: float, delta: float, v_bar: float) -> float:
    """Finite-n scaling sqrt(beta / (delta^2 vbar))."""
    return math.sqrt(beta / (delta * delta * v_bar))


@dataclass(frozen=True)
class ResolventStats:
    """Trace and total sum of Y^(1), Y^(2), Y^(3) for one draw (index k-1)."""

    trace: tuple[float, float, float]
    total: tuple[float, float, float]
    seed: int | None = None


def resolvent_stats(sample: RmtSample, delta: float, v_bar: float) -> ResolventStats:
    """Traces and 1'Y1 for the three normalised resolvents.

    With R = (V^-1 - k C)^-1:  Y1 = R/n,  Y2 = V^-1/2 R V^-1/2 / n,
    Y3 = V^1/2 R V^1/2 / n.  One Cholesky factorisation serves all three.
    """
    n = sample.n
    v = sample.v
    if sample.beta == 0:
        # V = 0: Y1 = V/n = 0, Y2 = I/n, Y3 = V^2/n = 0
        return ResolventStats((0.0, 1.0, 0.0), (0.0, 1.0, 0.0), sample.seed)
    k = kappa_n(sample.beta, delta, v_bar)
    C = build_wigner_C(sample)
    S = -k * C
    S[np.diag_indices_from(S)] += 1.0 / v
    L, lower = _cholesky(S, "V^-1 - kappa C")
    Linv = la.solve_triangular(L, np.eye(n), lower=True, check_finite=False)
    diag_R = np.einsum("ij,ij->j", Linv, Linv)
    probes = np.column_stack([np.ones(n), 1.0 / np.sqrt(v), np.sqrt(v)])
    half = Linv @ probes
    totals = np.einsum("ij,ij->j", half, half) / n
    traces = (diag_R.sum() / n, (diag_R / v).sum() / n, (diag_R * v).sum() / n)
    return ResolventStats(tuple(float(t) for t in traces), tuple(float(t) for t in totals),
                          sample.seed)


def assumption1_gaps(dist: DistributionSpec, beta: float, delta: float, n: int,
                     samples: int, seed: int, v_bar: float | None = None) -> np.ndarray:
    """Leave-one-out gaps |1'Y^(k)1 - mean trace of the other draws|.

    Returns an array of shape (samples, 3), column k-1 for Y^(k).  The trace
    expectation is taken over the whole (weights, graph) ensemble.
    """
    if samples < 2:
        raise ValueError("need at least two draws for a leave-one-out estimate")
    if v_bar is None:
        v_bar = beta * dist.moments().mean
    stats = [resolvent_stats(draw_sample(dist, beta, n, child_seed(seed, s)), delta, v_bar)
             for s in range(samples)]
    traces = np.array([s.trace for s in stats])
    totals = np.array([s.total for s in stats])
    loo_mean = (traces.sum(axis=0) - traces) / (samples - 1)
    return np.abs(totals - loo_mean)


def assumption1_gap(dist: DistributionSpec, beta: float, delta: float, n: int, k: int,
                    samples: int, seed: int, v_bar: float | None = None) -> float:
    """|1'Y^(k)1 - E tr Y^(k)| for one fresh draw, E estimated from ``samples`` draws."""
    if k not in (1, 2, 3):
        raise ValueError("k must be 1, 2 or 3")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    _check_cap(n)
    if v_bar is None:
        v_bar = beta * dist.moments().mean
    ensemble = [resolvent_stats(draw_sample(dist, beta, n, child_seed(seed, s)), delta, v_bar)
                for s in range(samples)]
    fresh = resolvent_stats(draw_sample(dist, beta, n, child_seed(seed, samples)), delta, v_bar)
    expected_trace = float(np.mean([s.trace[k - 1] for s in ensemble]))
    return abs(fresh.total[k - 1] - expected_trace)


def wigner_stats(C: np.ndarray) -> dict:
    """Off-diagonal mean and variance, and the extreme eigenvalues of C."""
    n = C.shape[0]
    off = C[~np.eye(n, dtype=bool)]
    eig = la.eigvalsh(C, check_finite=False)
    return {"offdiag_mean": float(off.mean()), "offdiag_var": float(off.var()),
            "eig_min": float(eig[0]), "eig_max": float(eig[-1]), "n": n}
