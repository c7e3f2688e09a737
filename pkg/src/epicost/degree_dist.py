"""Degree distributions p_n(w), their moments, and the scaled law of v = beta * w.

Four base kinds are supported (point mass, exponential, Pareto, empirical)
plus ``Truncated``, the conditional law of a continuous kind on an interval.
``ScaledDistribution`` multiplies weights by the infection rate and, for
unbounded bases, cuts both tails at a small quantile so that the resulting
law has compact support [v_min, v_max] with v_min > 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import QuadratureError

DEFAULT_TAIL_MASS = 1e-6
DEFAULT_QUAD_TOL = 1e-10


@dataclass(frozen=True)
class Moments:
    mean: float
    second_moment: float


class DistributionSpec:
    """Common interface of the weight distributions."""

    continuous = False

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError

    def moments(self) -> Moments:
        raise NotImplementedError

    def support(self) -> tuple[float, float]:
        raise NotImplementedError

    def scaled(self, factor: float) -> "DistributionSpec":
        """Law of ``factor * w``."""
        raise NotImplementedError

    def text(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class PointMass(DistributionSpec):
    w0: float

    def __post_init__(self):
        if not (self.w0 > 0 and math.isfinite(self.w0)):
            raise ValueError(f"point mass location must be positive, got {self.w0}")

    def sample(self, rng, n):
        return np.full(n, float(self.w0))

    def moments(self):
        return Moments(self.w0, self.w0 * self.w0)

    def support(self):
        return (self.w0, self.w0)

    def scaled(self, factor):
        return PointMass(self.w0 * factor)

    def text(self):
        return f"pointmass:{self.w0!r}"


class _Continuous(DistributionSpec):
    continuous = True

    def pdf(self, w):
        raise NotImplementedError

    def survival(self, w):
        raise NotImplementedError

    def isf(self, s):
        """Inverse survival function."""
        raise NotImplementedError

    def sample(self, rng, n):
        lo, hi = self.support()
        s_hi = self.survival(lo)
        s_lo = self.survival(hi)
        s = s_lo + (s_hi - s_lo) * (1.0 - rng.random(n))
        return self.isf(s)


@dataclass(frozen=True)
class Exponential(_Continuous):
    rate: float

    def __post_init__(self):
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise ValueError(f"exponential rate must be positive, got {self.rate}")

    def sample(self, rng, n):
        return rng.exponential(1.0 / self.rate, size=n)

    def pdf(self, w):
        w = np.asarray(w, dtype=float)
        return np.where(w >= 0, self.rate * np.exp(-self.rate * w), 0.0)

    def survival(self, w):
        return np.exp(-self.rate * np.maximum(w, 0.0))

    def isf(self, s):
        return -np.log(s) / self.rate

    def moments(self):
        return Moments(1.0 / self.rate, 2.0 / self.rate**2)

    def support(self):
        return (0.0, math.inf)

    def scaled(self, factor):
        return Exponential(self.rate / factor)

    def text(self):
        return f"exponential:{self.rate!r}"


@dataclass(frozen=True)
class Pareto(_Continuous):
    """Density shape * scale**shape / w**(shape + 1) on [scale, inf)."""

    shape: float
    scale: float = 1.0

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise ValueError(f"Pareto parameters must be positive, got {self.shape}, {self.scale}")

    def sample(self, rng, n):
        return self.scale * (1.0 + rng.pareto(self.shape, size=n))

    def pdf(self, w):
        w = np.asarray(w, dtype=float)
        safe = np.maximum(w, self.scale)
        return np.where(w >= self.scale,
                        self.shape * self.scale**self.shape / safe ** (self.shape + 1), 0.0)

    def survival(self, w):
        return (self.scale / np.maximum(w, self.scale)) ** self.shape

    def isf(self, s):
        return self.scale * np.asarray(s, dtype=float) ** (-1.0 / self.shape)

    def moments(self):
        t, x = self.shape, self.scale
        mean = t * x / (t - 1) if t > 1 else math.inf
        second = t * x * x / (t - 2) if t > 2 else math.inf
        return Moments(mean, second)

    def support(self):
        return (self.scale, math.inf)

    def scaled(self, factor):
        return Pareto(self.shape, self.scale * factor)

    def text(self):
        if self.scale == 1.0:
            return f"pareto:{self.shape!r}"
        return f"pareto:{self.shape!r}:{self.scale!r}"


@dataclass(frozen=True)
class Empirical(DistributionSpec):
    """Uniform law over a finite list of observed weights."""

    weights: tuple[float, ...]
    source: str | None = field(default=None, compare=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.size == 0:
            raise ValueError("empirical distribution needs at least one weight")
        if not np.all(w > 0) or not np.all(np.isfinite(w)):
            raise ValueError("empirical weights must be positive and finite")
        object.__setattr__(self, "weights", tuple(float(x) for x in w))

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.weights)

    def sample(self, rng, n):
        return rng.choice(self.array, size=n, replace=True)

    def moments(self):
        w = self.array
        return Moments(float(w.mean()), float(np.mean(w * w)))

    def support(self):
        w = self.array
        return (float(w.min()), float(w.max()))

    def scaled(self, factor):
        return Empirical(tuple(x * factor for x in self.weights), source=self.source)

    def text(self):
        if self.source:
            return f"empirical:{self.source}"
        return "empirical:<inline>"


@dataclass(frozen=True)
class Truncated(_Continuous):
    """Conditional law of a continuous ``base`` given lower <= w <= upper."""

    base: _Continuous
    upper: float = math.inf
    lower: float = 0.0

    def __post_init__(self):
        if not isinstance(self.base, _Continuous):
            raise TypeError("Truncated needs a continuous base; use truncate() for others")
        b_lo, b_hi = self.base.support()
        lo, hi = max(self.lower, b_lo), min(self.upper, b_hi)
        if not hi > lo:
            raise ValueError(f"empty truncation interval [{lo}, {hi}]")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def mass(self) -> float:
        """Probability the base assigns to [lower, upper]."""
        return float(self.base.survival(self.lower) - self.base.survival(self.upper))

    def pdf(self, w):
        w = np.asarray(w, dtype=float)
        inside = (w >= self.lower) & (w <= self.upper)
        return np.where(inside, self.base.pdf(w) / self.mass, 0.0)

    def survival(self, w):
        w = np.clip(w, self.lower, self.upper)
        return (self.base.survival(w) - self.base.survival(self.upper)) / self.mass

    def isf(self, s):
        s_up = self.base.survival(self.upper)
        return self.base.isf(s_up + np.asarray(s, dtype=float) * self.mass)

    def sample(self, rng, n):
        s_hi = self.base.survival(self.lower)
        s_lo = self.base.survival(self.upper)
        s = s_lo + (s_hi - s_lo) * (1.0 - rng.random(n))
        return self.base.isf(s)

    def support(self):
        return (self.lower, self.upper)

    def moments(self):
        a, b, z = self.lower, self.upper, self.mass
        base = self.base
        if isinstance(base, Exponential):
            lam = base.rate

            def prim(w, k):
                # antiderivative of w**k * lam * exp(-lam w), k in {1, 2}
                e = math.exp(-lam * w) if math.isfinite(w) else 0.0
                if k == 1:
                    return -(w + 1 / lam) * e if e else 0.0
                return -(w * w + 2 * w / lam + 2 / lam**2) * e if e else 0.0

            m1 = (prim(b, 1) - prim(a, 1)) / z
            m2 = (prim(b, 2) - prim(a, 2)) / z
            return Moments(m1, m2)
        if isinstance(base, Pareto):
            t, x = base.shape, base.scale

            def raw(k):
                if k == t:
                    return t * x**t * math.log(b / a)
                if math.isinf(b):
                    return math.inf if k > t else t * x**t * (-(a ** (k - t))) / (k - t)
                return t * x**t * (b ** (k - t) - a ** (k - t)) / (k - t)

            return Moments(raw(1) / z, raw(2) / z)
        if isinstance(base, Truncated):
            return Truncated(base.base, min(self.upper, base.upper),
                             max(self.lower, base.lower)).moments()
        raise TypeError(f"no moment formula for {type(base).__name__}")

    def scaled(self, factor):
        return Truncated(self.base.scaled(factor), self.upper * factor, self.lower * factor)

    def text(self):
        return f"{self.base.text()}@[{self.lower!r},{self.upper!r}]"


def truncate(dist: DistributionSpec, upper: float, lower: float = 0.0) -> DistributionSpec:
    """Conditional law of ``dist`` on [lower, upper]; raises if that set is null."""
    if isinstance(dist, PointMass):
        if lower <= dist.w0 <= upper:
            return dist
        raise ValueError(f"point mass at {dist.w0} lies outside [{lower}, {upper}]")
    if isinstance(dist, Empirical):
        kept = tuple(w for w in dist.weights if lower <= w <= upper)
        if not kept:
            raise ValueError(f"no empirical weight inside [{lower}, {upper}]")
        return Empirical(kept, source=dist.source)
    if isinstance(dist, Truncated):
        return Truncated(dist.base, min(upper, dist.upper), max(lower, dist.lower))
    return Truncated(dist, upper, lower)


def truncate_tails(dist: DistributionSpec, tail_mass: float = DEFAULT_TAIL_MASS
                   ) -> tuple[DistributionSpec, float]:
    """Cut unbounded or zero-touching tails at quantiles ``tail_mass`` / ``1 - tail_mass``.

    Returns the bounded law and the probability mass that was discarded.
    """
    if not dist.continuous:
        return dist, 0.0
    lo, hi = dist.support()
    new_lo, new_hi, dropped = lo, hi, 0.0
    if math.isinf(hi):
        new_hi = float(dist.isf(tail_mass))
        dropped += tail_mass
    if lo <= 0.0:
        new_lo = float(dist.isf(1.0 - tail_mass))
        dropped += tail_mass
    if dropped == 0.0:
        return dist, 0.0
    return truncate(dist, new_hi, new_lo), dropped


def moments(dist: "DistributionSpec | ScaledDistribution") -> Moments:
    """Analytic (mean, second moment); ``math.inf`` marks a divergent moment."""
    return dist.moments()


def sample_weights(dist: DistributionSpec, n: int, seed: int) -> np.ndarray:
    """``n`` i.i.d. weights from ``dist``; identical seeds give identical vectors."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(int(seed))
    return np.asarray(dist.sample(rng, n), dtype=float)


@dataclass(frozen=True)
class ScaledDistribution:
    """Law of v = scale * w, restricted to a compact support [v_min, v_max]."""

    base: DistributionSpec
    scale: float
    tail_mass: float = DEFAULT_TAIL_MASS
    bounded: DistributionSpec = field(init=False, repr=False, compare=False)
    truncation_mass: float = field(init=False, compare=False)

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        bounded, dropped = truncate_tails(self.base, self.tail_mass)
        object.__setattr__(self, "bounded", bounded.scaled(self.scale))
        object.__setattr__(self, "truncation_mass", dropped)

    @property
    def support(self) -> tuple[float, float]:
        return self.bounded.support()

    @property
    def v_min(self) -> float:
        return self.support[0]

    @property
    def v_max(self) -> float:
        return self.support[1]

    def moments(self) -> Moments:
        return self.bounded.moments()

    def pdf(self, v):
        return self.bounded.pdf(v)

    def integrate(self, integrand: Callable, tol: float = DEFAULT_QUAD_TOL) -> float:
        return integrate(self, integrand, tol)


def integrate(dist: ScaledDistribution, integrand: Callable, tol: float = DEFAULT_QUAD_TOL) -> float:
    """Expectation of ``integrand(v)`` under ``dist`` (a renormalised, compact law).

    ``integrand`` must accept numpy arrays.  Discrete laws are summed exactly.
    """
    law = dist.bounded
    if isinstance(law, PointMass):
        return float(np.asarray(integrand(np.array([law.w0])), dtype=float)[0])
    if isinstance(law, Empirical):
        vals = np.asarray(integrand(law.array), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise QuadratureError("integrand not finite on the empirical support")
        return float(vals.mean())
    lo, hi = law.support()
    breaks = _log_breaks(lo, hi)
    return adaptive_gauss_legendre(lambda v: integrand(v) * law.pdf(v), breaks, tol)


def _log_breaks(lo: float, hi: float, per_decade: int = 4) -> np.ndarray:
    decades = math.log10(hi / lo)
    pieces = max(4, int(math.ceil(decades * per_decade)))
    return np.geomspace(lo, hi, pieces + 1)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(15)
_ROUNDING = 64 * np.finfo(float).eps


def _gl(f, a, b):
    half = 0.5 * (b - a)
    x = half * _GL_NODES + 0.5 * (a + b)
    vals = np.asarray(f(x), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise QuadratureError(f"integrand not finite on [{a:.6g}, {b:.6g}]")
    return half * float(_GL_WEIGHTS @ vals)


def adaptive_gauss_legendre(f: Callable, breakpoints, tol: float = DEFAULT_QUAD_TOL,
                            max_depth: int = 60, max_intervals: int = 200_000) -> float:
    """Composite 15-point Gauss-Legendre with bisection until halves agree to ``tol``.

    A piece is also accepted once its halves agree to rounding level, so a
    tolerance below machine precision cannot trigger endless bisection.
    """
    breakpoints = np.asarray(breakpoints, dtype=float)
    n_pieces = len(breakpoints) - 1
    stack = []
    for a, b in zip(breakpoints[:-1], breakpoints[1:]):
        stack.append((a, b, _gl(f, a, b), tol / n_pieces, 0))
    total = 0.0
    visited = 0
    while stack:
        a, b, whole, local_tol, depth = stack.pop()
        m = 0.5 * (a + b)
        left, right = _gl(f, a, m), _gl(f, m, b)
        visited += 1
        diff = abs(left + right - whole)
        if diff <= local_tol or diff <= _ROUNDING * (abs(left) + abs(right)):
            total += left + right
            continue
        if depth >= max_depth or visited >= max_intervals or not (a < m < b):
            raise QuadratureError(
                f"quadrature did not converge on [{a:.6g}, {b:.6g}]",
                best_estimate=total, residual=abs(left + right - whole))
        stack.append((a, m, left, local_tol / 2, depth + 1))
        stack.append((m, b, right, local_tol / 2, depth + 1))
    return total


def parse_dist(text: str) -> DistributionSpec:
    """Parse ``pointmass:W``, ``exponential:RATE``, ``pareto:SHAPE[:SCALE]`` or ``empirical:PATH``."""
    kind, _, rest = text.partition(":")
    kind = kind.strip().lower()
    if not rest:
        raise ValueError(f"distribution {text!r} lacks parameters")
    if kind == "empirical":
        path = Path(rest)
        weights = []
        for lineno, line in enumerate(path.read_text().splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                weights.append(float(line))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: not a number: {line!r}") from None
        return Empirical(tuple(weights), source=str(path))
    args = [float(x) for x in rest.split(":")]
    if kind == "pointmass" and len(args) == 1:
        return PointMass(args[0])
    if kind == "exponential" and len(args) == 1:
        return Exponential(args[0])
    if kind == "pareto" and len(args) in (1, 2):
        return Pareto(*args)
    raise ValueError(f"unrecognised distribution {text!r}")
