"""Per-node disease cost: exact linear solve, spectral bound, asymptotic formula."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .degree_dist import DEFAULT_QUAD_TOL, ScaledDistribution
from .epidemic import EpidemicParams
from .errors import (AssumptionViolatedError, ConvergenceError, FixedPointError,
                     InapplicableError, InstabilityError, QuadratureError)
from .graph import DEFAULT_EIG_TOL, Graph, spectral_radius

STABILITY_MARGIN = 1e-9
DEFAULT_SOLVE_TOL = 1e-10
FIXED_POINT_MAXITER = 10_000

METHODS = ("linear_solve", "asymptotic", "spectral_bound", "monte_carlo", "er_closed_form")


@dataclass(frozen=True)
class CostReport:
    value: float
    method: str
    lambda_max: float | None = None
    stable: bool | None = None
    residual: float | None = None
    stderr: float | None = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")

    def csv_row(self) -> dict:
        spread = self.stderr if self.stderr is not None else self.residual
        return {
            "method": self.method,
            "value": self.value,
            "lambda_max": self.lambda_max,
            "residual_or_stderr": spread,
        }


@dataclass(frozen=True)
class FixedPointResult:
    F: float
    kappa: float
    iterations: int
    residual: float
    v_bar: float
    second_moment: float


def system_lambda_max(g: Graph, params: EpidemicParams, tol: float = DEFAULT_EIG_TOL) -> float:
    """lambda_max(M) for M = (1 - delta) I + beta A."""
    lam_a = spectral_radius(g, tol) if params.beta > 0 else 0.0
    return 1.0 - params.delta + params.beta * lam_a


def check_stable(lambda_max: float) -> None:
    if not lambda_max < 1.0 - STABILITY_MARGIN:
        raise InstabilityError(lambda_max)


def conjugate_gradient(matvec: Callable, b: np.ndarray, tol: float = DEFAULT_SOLVE_TOL,
                       max_iter: int | None = None, x0: np.ndarray | None = None):
    """Solve S x = b for symmetric positive definite S given as ``matvec``.

    Stops when ||b - S x|| <= tol * ||b||.  Returns (x, relative residual, iterations).
    """
    b = np.asarray(b, dtype=float)
    n = b.size
    max_iter = max_iter or max(10 * n, 100)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - matvec(x)
    d = r.copy()
    rr = float(r @ r)
    b_norm = float(np.linalg.norm(b)) or 1.0
    it = 0
    while math.sqrt(rr) > tol * b_norm:
        if it >= max_iter:
            raise ConvergenceError(
                f"conjugate gradient stalled after {it} iterations",
                best_estimate=x, residual=math.sqrt(rr) / b_norm)
        Sd = matvec(d)
        curvature = float(d @ Sd)
        if curvature <= 0:
            raise ConvergenceError("operator is not positive definite",
                                   best_estimate=x, residual=math.sqrt(rr) / b_norm)
        step = rr / curvature
        x += step * d
        r -= step * Sd
        rr_new = float(r @ r)
        d = r + (rr_new / rr) * d
        rr = rr_new
        it += 1
    # report the true residual, not the recursively updated one
    true_res = float(np.linalg.norm(b - matvec(x))) / b_norm
    return x, true_res, it


def linear_cost(g: Graph, params: EpidemicParams, tol: float = DEFAULT_SOLVE_TOL,
                lambda_max: float | None = None) -> CostReport:
    """alpha c_d 1^T (I - M)^{-1} 1 / n, via CG on (delta I - beta A) x = 1."""
    lam = system_lambda_max(g, params) if lambda_max is None else lambda_max
    check_stable(lam)
    A = g.adjacency

    def matvec(x):
        return params.delta * x - params.beta * (A @ x)

    x, res, iters = conjugate_gradient(matvec, np.ones(g.n), tol)
    value = params.alpha * params.cost * float(x.sum()) / g.n
    return CostReport(value, "linear_solve", lam, True, residual=res,
                      diagnostics={"iterations": iters})


def spectral_bound(g: Graph, params: EpidemicParams,
                   lambda_max: float | None = None) -> CostReport:
    """alpha c_d / (1 - lambda_max(M))."""
    lam = system_lambda_max(g, params) if lambda_max is None else lambda_max
    check_stable(lam)
    return CostReport(params.alpha * params.cost / (1.0 - lam), "spectral_bound", lam, True)


def kappa_for(beta: float, delta: float, v_bar: float) -> float:
    """Scaling constant sqrt(beta) / (delta sqrt(v_bar)) for fixed beta."""
    return math.sqrt(beta) / (delta * math.sqrt(v_bar))


def _fixed_point_map(dist: ScaledDistribution, k2: float, F: float, tol: float) -> float:
    return dist.integrate(lambda v: v / (1.0 - k2 * F * v), tol)


def solve_fixed_point_F(dist: ScaledDistribution, kappa: float, tol: float = DEFAULT_QUAD_TOL,
                        max_iter: int = FIXED_POINT_MAXITER) -> FixedPointResult:
    """Smallest root of F = E[1 / (1/v - kappa^2 F)], the branch with F -> E v as kappa -> 0.

    Damped iteration from F = E v; the damping halves whenever a step would
    leave the region kappa^2 F < 1 / v_max where the integrand stays finite.
    """
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    m = dist.moments()
    if kappa == 0:
        return FixedPointResult(m.mean, 0.0, 0, 0.0, m.mean, m.second_moment)
    k2 = kappa * kappa
    ceiling = 1.0 / (k2 * dist.v_max)
    quad_tol = tol * 1e-2
    F = m.mean
    eta = 1.0
    residual = math.inf
    for it in range(1, max_iter + 1):
        try:
            G = _fixed_point_map(dist, k2, F, quad_tol)
        except QuadratureError as exc:
            raise FixedPointError(f"quadrature failed at F={F:.12g}", best_estimate=F) from exc
        residual = abs(G - F)
        if residual <= tol:
            return FixedPointResult(F, kappa, it, residual, m.mean, m.second_moment)
        while True:
            candidate = (1.0 - eta) * F + eta * G
            if math.isfinite(candidate) and candidate < ceiling:
                break
            eta *= 0.5
            if eta < 1e-12:
                raise FixedPointError(
                    f"fixed-point iterate left the admissible region (kappa={kappa})",
                    best_estimate=F, residual=residual)
        F = candidate
    raise FixedPointError(f"no convergence in {max_iter} iterations (kappa={kappa})",
                          best_estimate=F, residual=residual)


def asymptotic_cost(dist: ScaledDistribution, delta: float, alpha: float, cost: float,
                    kappa: float, tol: float = DEFAULT_QUAD_TOL) -> CostReport:
    """Large-n limit of the per-node cost on expected-degree graphs.

    kappa = 0:  (a c/d) (1 - vbar^2 / (E v^2 - d vbar))
    kappa > 0:  (a c/d) (1 + k^2 F^2 - k^2 F^2 / (1 - vbar/F - d k^2 vbar))

    Both denominators are negative in the stable regime; a non-negative one
    means the formula does not describe a dying-out epidemic.
    """
    base_m = dist.base.moments()
    if not math.isfinite(base_m.second_moment):
        raise AssumptionViolatedError(
            f"degree distribution {dist.base.text()} has infinite variance")
    lead = alpha * cost / delta
    if kappa == 0:
        m = dist.moments()
        denom = m.second_moment - delta * m.mean
        if not denom < 0:
            raise InapplicableError(
                f"E v^2 - delta vbar = {denom:.6g} >= 0: outside the stable regime")
        value = lead * (1.0 - m.mean**2 / denom)
        diag = {"F": m.mean, "v_bar": m.mean, "second_moment": m.second_moment,
                "truncation_mass": dist.truncation_mass}
        return CostReport(value, "asymptotic", residual=0.0, diagnostics=diag)
    fp = solve_fixed_point_F(dist, kappa, tol)
    k2F2 = kappa**2 * fp.F**2
    denom = 1.0 - fp.v_bar / fp.F - delta * kappa**2 * fp.v_bar
    if not (math.isfinite(denom) and denom < 0):
        raise InapplicableError(
            f"1 - vbar/F - delta kappa^2 vbar = {denom:.6g} is not negative")
    value = lead * (1.0 + k2F2 - k2F2 / denom)
    if not (math.isfinite(value) and value > 0):
        raise InapplicableError(f"asymptotic cost evaluates to {value}")
    diag = {"F": fp.F, "v_bar": fp.v_bar, "second_moment": fp.second_moment,
            "iterations": fp.iterations, "truncation_mass": dist.truncation_mass}
    return CostReport(value, "asymptotic", residual=fp.residual, diagnostics=diag)


def er_exact_cost(v_bar: float, delta: float, alpha: float, cost: float) -> float:
    """alpha c_d / (delta - vbar), vbar = beta n p."""
    if not delta > v_bar:
        raise InstabilityError(1.0 - delta + v_bar,
                               f"threshold violated: delta={delta} <= vbar={v_bar}")
    return alpha * cost / (delta - v_bar)


def er_whp_bound(n: int, p: float, beta: float, delta: float, alpha: float, cost: float) -> float:
    """alpha c_d / (delta - beta n p)."""
    return er_exact_cost(beta * n * p, delta, alpha, cost)


def er_cost_report(v_bar: float, params: EpidemicParams) -> CostReport:
    value = er_exact_cost(v_bar, params.delta, params.alpha, params.cost)
    return CostReport(value, "er_closed_form", 1.0 - params.delta + v_bar, True,
                      diagnostics={"v_bar": v_bar})
