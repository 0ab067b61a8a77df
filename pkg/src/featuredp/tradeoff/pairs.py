"""One-dimensional dominating pairs, hockey-stick divergences and exact trade-off curves."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, optimize, special, stats

from featuredp.errors import DomainError, UnsupportedPairError
from featuredp.tradeoff.curve import (
    DEFAULT_GRID_SIZE,
    TradeoffCurve,
    default_grid,
    from_points,
)

_NORM_TOL = 1e-9


class GaussianMixture:
    """Finite mixture of equal-scale normals with a scipy-like interface."""

    def __init__(self, weights, means, scale: float):
        w = np.asarray(weights, dtype=float)
        keep = w > 0
        self.weights = w[keep] / w[keep].sum()
        self.means = np.asarray(means, dtype=float)[keep]
        self.scale = float(scale)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)[..., None]
        comps = stats.norm.logpdf(x, self.means, self.scale) + np.log(self.weights)
        return special.logsumexp(comps, axis=-1)

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def logcdf(self, x):
        x = np.asarray(x, dtype=float)[..., None]
        return special.logsumexp(stats.norm.logcdf(x, self.means, self.scale) + np.log(self.weights), axis=-1)

    def logsf(self, x):
        x = np.asarray(x, dtype=float)[..., None]
        return special.logsumexp(stats.norm.logsf(x, self.means, self.scale) + np.log(self.weights), axis=-1)

    def cdf(self, x):
        return np.exp(self.logcdf(x))

    def sf(self, x):
        return np.exp(self.logsf(x))

    def _invert(self, log_fn, component_quantile, target, lower_tail: bool):
        # a mixture quantile lies between the smallest and largest component quantiles
        scalar = np.ndim(target) == 0
        target = np.atleast_1d(np.asarray(target, dtype=float))
        out = np.empty_like(target)
        pad = 1e-9 * self.scale
        for i, t in enumerate(target):
            if t <= 0.0:
                out[i] = -np.inf if lower_tail else np.inf
            elif t >= 1.0:
                out[i] = np.inf if lower_tail else -np.inf
            else:
                qs = component_quantile(t, self.means, self.scale)
                lo, hi = float(np.min(qs)) - pad, float(np.max(qs)) + pad
                if hi - lo <= 2 * pad:
                    out[i] = 0.5 * (lo + hi)
                    continue
                log_t = math.log(t)
                out[i] = optimize.brentq(lambda x: float(log_fn(x)) - log_t, lo, hi, xtol=1e-13)
        return float(out[0]) if scalar else out

    def ppf(self, q):
        return self._invert(self.logcdf, stats.norm.ppf, q, True)

    def isf(self, q):
        return self._invert(self.logsf, stats.norm.isf, q, False)

    def rvs(self, size, random_state=None):
        rng = np.random.default_rng(random_state)
        comp = rng.choice(len(self.weights), size=size, p=self.weights)
        return rng.normal(self.means[comp], self.scale)

    def __eq__(self, other):
        return (
            isinstance(other, GaussianMixture)
            and self.scale == other.scale
            and np.array_equal(self.weights, other.weights)
            and np.array_equal(self.means, other.means)
        )

    def __hash__(self):
        return hash((self.scale, self.weights.tobytes(), self.means.tobytes()))


class DiscreteDistribution:
    """Probability mass function on a finite set of real-valued points."""

    def __init__(self, points, probs):
        self.points = np.asarray(points, dtype=float)
        self.probs = np.asarray(probs, dtype=float)
        if self.points.shape != self.probs.shape:
            raise DomainError("points and probs must have the same shape")
        if np.any(self.probs < 0):
            raise DomainError("probabilities must be non-negative")

    def logpmf(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.points, x)
        idx = np.clip(idx, 0, len(self.points) - 1)
        hit = self.points[idx] == x
        with np.errstate(divide="ignore"):
            return np.where(hit, np.log(self.probs[idx]), -np.inf)

    def rvs(self, size, random_state=None):
        rng = np.random.default_rng(random_state)
        return rng.choice(self.points, size=size, p=self.probs / self.probs.sum())


@dataclass(frozen=True, eq=False)
class DominatingPair:
    """Two one-dimensional distributions ``(P, Q)``.

    Continuous pairs wrap scipy-style frozen distributions that expose
    ``logpdf``, ``cdf``, ``sf``, ``ppf`` and ``isf``.  Discrete pairs carry
    probability vectors on a shared, sorted point set.
    """

    dist_p: object
    dist_q: object
    support: tuple | np.ndarray
    monotone_lr: bool = True
    discrete: bool = False
    name: str = ""
    # optional closed form for the point where llr(x) equals a given value
    llr_inverse: Callable | None = None

    def __post_init__(self):
        if self.discrete:
            pts = np.asarray(self.support, dtype=float)
            if np.any(np.diff(pts) <= 0):
                raise DomainError("discrete support must be strictly increasing")
            for label, d in (("P", self.dist_p), ("Q", self.dist_q)):
                total = float(np.sum(np.exp(d.logpmf(pts))))
                if abs(total - 1.0) > _NORM_TOL:
                    raise DomainError(f"{label} sums to {total!r} on the declared support")
        else:
            lo, hi = self.support
            for label, d in (("P", self.dist_p), ("Q", self.dist_q)):
                total = float(d.cdf(hi) - d.cdf(lo))
                if abs(total - 1.0) > _NORM_TOL:
                    raise DomainError(f"{label} integrates to {total!r} on the declared support")

    # -- constructors ---------------------------------------------------------
    @classmethod
    def gaussian(cls, mu: float, sigma: float = 1.0) -> "DominatingPair":
        if mu == 0:
            inverse = None
        else:
            def inverse(level):
                return (sigma**2 * np.asarray(level) + 0.5 * mu**2) / mu

        return cls(
            stats.norm(0.0, sigma), stats.norm(mu, sigma), (-np.inf, np.inf), True,
            name=f"gauss(mu={mu},sigma={sigma})", llr_inverse=inverse,
        )

    @classmethod
    def subsampled_gaussian(cls, sensitivity: float, sigma: float, sampling_prob: float) -> "DominatingPair":
        """N(0, sigma) against (1 - p) N(0, sigma) + p N(sensitivity, sigma)."""
        mix = GaussianMixture([1.0 - sampling_prob, sampling_prob], [0.0, sensitivity], sigma)
        inverse = None
        if sensitivity > 0 and sampling_prob > 0:
            def inverse(level):
                # llr(x) = log(1 - p + p exp((tau x - tau^2 / 2) / sigma^2))
                with np.errstate(invalid="ignore", divide="ignore"):
                    inner = np.log(np.expm1(np.asarray(level, dtype=float)) + sampling_prob) - math.log(sampling_prob)
                return (sigma**2 * inner + 0.5 * sensitivity**2) / sensitivity

        return cls(
            stats.norm(0.0, sigma), mix, (-np.inf, np.inf), True,
            name=f"subsampled_gauss(tau={sensitivity},sigma={sigma},p={sampling_prob})",
            llr_inverse=inverse,
        )

    @classmethod
    def from_pmfs(cls, probs_p, probs_q, points=None) -> "DominatingPair":
        """Discrete pair; the likelihood ratio is always orderable on a finite set."""
        probs_p = np.asarray(probs_p, dtype=float)
        probs_q = np.asarray(probs_q, dtype=float)
        if points is None:
            points = np.arange(len(probs_p), dtype=float)
        return cls(
            DiscreteDistribution(points, probs_p),
            DiscreteDistribution(points, probs_q),
            np.asarray(points, dtype=float),
            True,
            discrete=True,
        )

    # -- densities --------------------------------------------------------------
    def log_density_p(self, x):
        return self.dist_p.logpmf(x) if self.discrete else self.dist_p.logpdf(x)

    def log_density_q(self, x):
        return self.dist_q.logpmf(x) if self.discrete else self.dist_q.logpdf(x)

    def llr(self, x):
        """log(q / p), the optimal test statistic for P against Q."""
        with np.errstate(invalid="ignore"):
            return np.asarray(self.log_density_q(x) - self.log_density_p(x), dtype=float)

    def swapped(self) -> "DominatingPair":
        inverse = None
        if self.llr_inverse is not None:
            forward = self.llr_inverse

            def inverse(level):
                return forward(-np.asarray(level))

        return DominatingPair(
            self.dist_q, self.dist_p, self.support, self.monotone_lr, self.discrete,
            self.name + "^T", llr_inverse=inverse,
        )

    def pmfs(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        pts = np.asarray(self.support, dtype=float)
        return pts, np.exp(self.dist_p.logpmf(pts)), np.exp(self.dist_q.logpmf(pts))

    def lr_increasing(self) -> bool:
        """Direction of the monotone likelihood ratio on a continuous support."""
        # compare far apart: near the bulk a peaked mixture's ratio can be flat to rounding
        for tail in (1e-9, 1e-4, 0.1):
            a, b = _quantile_bounds(self, tail)
            la, lb = float(self.llr(a)), float(self.llr(b))
            if np.isfinite(la) and np.isfinite(lb) and la != lb:
                return lb > la
        return True

    def sample_p(self, n, rng):
        return self.dist_p.rvs(size=n, random_state=rng)

    def sample_q(self, n, rng):
        return self.dist_q.rvs(size=n, random_state=rng)


def hockey_stick(pair: DominatingPair, order: float) -> float:
    """E_Q[(p/q - order)_+] for the pair (P, Q).

    Discrete supports are summed exactly.  Continuous pairs with a monotone
    likelihood ratio reduce to a difference of CDFs at the crossing point;
    other continuous pairs fall back to adaptive quadrature.
    """
    if order < 0:
        raise DomainError(f"order must be >= 0, got {order}")
    if order == 0:
        return 1.0
    if pair.discrete:
        _, pp, pq = pair.pmfs()
        return float(np.sum(np.clip(pp - order * pq, 0.0, None)))
    lo, hi = pair.support
    if pair.monotone_lr:
        target = -math.log(order)  # p/q > order  <=>  log(q/p) < -log(order)
        inc = pair.lr_increasing()
        x = _solve_llr(pair, np.array([target]), inc)[0]
        if inc:
            return float(max(pair.dist_p.cdf(x) - order * pair.dist_q.cdf(x), 0.0))
        return float(max(pair.dist_p.sf(x) - order * pair.dist_q.sf(x), 0.0))

    def integrand(x):
        return max(math.exp(pair.log_density_p(x)) - order * math.exp(pair.log_density_q(x)), 0.0)

    val, _ = integrate.quad(integrand, lo, hi, epsabs=1e-10, limit=500)
    return float(val)


def _quantile_bounds(pair: DominatingPair, tail: float) -> tuple[float, float]:
    lo = min(float(pair.dist_p.ppf(tail)), float(pair.dist_q.ppf(tail)))
    hi = max(float(pair.dist_p.isf(tail)), float(pair.dist_q.isf(tail)))
    slo, shi = pair.support
    return max(lo, slo), min(hi, shi)


def _solve_llr(pair: DominatingPair, targets: np.ndarray, increasing: bool, tail: float = 1e-300) -> np.ndarray:
    """Vectorized bisection for x with llr(x) = target; clamps to the bracket."""
    lo, hi = _quantile_bounds(pair, tail)
    if pair.llr_inverse is not None:
        x = pair.llr_inverse(targets)
        # the shipped closed forms are undefined only where no x attains the level
        # on the side that the tail formulas read, which the lower end covers
        x = np.where(np.isnan(x), lo, x)
        return np.clip(x, lo, hi)
    a = np.full(targets.shape, lo)
    b = np.full(targets.shape, hi)
    sign = 1.0 if increasing else -1.0
    for _ in range(200):
        mid = 0.5 * (a + b)
        above = sign * (pair.llr(mid) - targets) > 0
        b = np.where(above, mid, b)
        a = np.where(above, a, mid)
        if np.all(b - a <= 1e-14 * np.maximum(1.0, np.abs(mid))):
            break
    return 0.5 * (a + b)


def _discrete_roc(pp: np.ndarray, pq: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vertices of the likelihood-ratio ROC for discrete P against Q."""
    with np.errstate(divide="ignore", invalid="ignore"):
        llr = np.where(pq > 0, np.log(pq) - np.log(pp), -np.inf)
    llr = np.where((pq > 0) & (pp == 0), np.inf, llr)
    order = np.argsort(-llr, kind="stable")
    llr, pp, pq = llr[order], pp[order], pq[order]
    # merge atoms with equal likelihood ratio so ties form a single segment
    keys, starts = np.unique(-llr, return_index=True)
    gp = np.add.reduceat(pp, starts)
    gq = np.add.reduceat(pq, starts)
    alphas = np.concatenate(([0.0], np.cumsum(gp)))
    tail_q = np.concatenate((np.cumsum(gq[::-1])[::-1], [0.0]))
    alphas[-1] = 1.0
    return alphas, tail_q


def tradeoff_from_pair(pair: DominatingPair, grid_size: int = DEFAULT_GRID_SIZE) -> TradeoffCurve:
    """Exact trade-off curve T(P, Q) from likelihood-ratio threshold tests."""
    if not pair.monotone_lr:
        raise UnsupportedPairError(
            "pair does not declare a monotone likelihood ratio; use mc_estimate_tradeoff instead"
        )
    grid = default_grid(grid_size)
    if pair.discrete:
        _, pp, pq = pair.pmfs()
        va, vb = _discrete_roc(pp, pq)
        va, idx = np.unique(va, return_index=True)
        vb = vb[idx]
        return from_points(va, vb, grid=grid)
    inc = pair.lr_increasing()
    with np.errstate(divide="ignore"):
        if inc:
            thresholds = pair.dist_p.isf(grid)
            betas = pair.dist_q.cdf(thresholds)
        else:
            thresholds = pair.dist_p.ppf(grid)
            betas = pair.dist_q.sf(thresholds)
    betas = np.asarray(betas, dtype=float)
    # shipped continuous pairs share full support, so no test has alpha = 0 and beta < 1
    betas[0] = 1.0
    betas[-1] = 0.0
    return from_points(grid, betas)

