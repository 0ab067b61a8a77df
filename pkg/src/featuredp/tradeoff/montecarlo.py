"""Empirical trade-off curves from samples, with DKW confidence bands."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from featuredp.errors import DomainError
from featuredp.tradeoff.curve import (
    DEFAULT_GRID_SIZE,
    TradeoffCurve,
    default_grid,
    from_points,
    identity_curve,
)
from featuredp.tradeoff.pairs import DominatingPair

Sampler = Callable[[int, np.random.Generator], np.ndarray]

MIN_SAMPLES = 10_000
_MAX_VERTICES = 20_000


def dkw_width(n: int, level: float) -> float:
    """Half-width of a uniform DKW band for an empirical CDF of ``n`` draws."""
    return math.sqrt(math.log(2.0 / (1.0 - level)) / (2.0 * n))


@dataclass(frozen=True, eq=False)
class EmpiricalTradeoff:
    """Empirical ROC of a threshold test together with its confidence band.

    ``alphas`` and ``betas`` are the error rates of the test that rejects
    when the score exceeds each observed threshold.  With probability at
    least ``level`` every true error rate lies within ``band_alpha`` and
    ``band_beta`` of its estimate simultaneously.
    """

    curve: TradeoffCurve
    alphas: np.ndarray
    betas: np.ndarray
    band_alpha: float
    band_beta: float
    level: float
    n_samples: int
    flags: tuple[str, ...] = ()

    def lower_violation(self, curve: TradeoffCurve) -> float:
        """How far ``curve`` rises above what the samples allow (<= 0 when consistent).

        A valid lower bound on every test must satisfy
        f(alpha_hat + band_alpha) <= beta_hat + band_beta.
        """
        return float(np.max(curve(np.minimum(self.alphas + self.band_alpha, 1.0)) - self.betas - self.band_beta))

    def upper_violation(self, curve: TradeoffCurve) -> float:
        """How far ``curve`` falls below what an optimal test achieves (<= 0 when consistent)."""
        return float(np.max(self.betas - self.band_beta - curve(np.maximum(self.alphas - self.band_alpha, 0.0))))

    def consistent_with(self, curve: TradeoffCurve) -> bool:
        """True when ``curve`` could be the exact trade-off of the sampled test."""
        return self.lower_violation(curve) <= 1e-12 and self.upper_violation(curve) <= 1e-12

    def not_below(self, reference: TradeoffCurve) -> bool:
        """True when the samples are compatible with ``reference`` being a lower bound."""
        return self.lower_violation(reference) <= 1e-12


def _roc(scores_p: np.ndarray, scores_q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Error rates of 'reject when score > t' at every observed threshold."""
    sp = np.sort(scores_p)
    sq = np.sort(scores_q)
    thresholds = np.unique(np.concatenate((sp, sq)))
    alphas = 1.0 - np.searchsorted(sp, thresholds, side="right") / len(sp)
    betas = np.searchsorted(sq, thresholds, side="right") / len(sq)
    # the test that always rejects
    alphas = np.concatenate(([1.0], alphas))
    betas = np.concatenate(([0.0], betas))
    return alphas[::-1], betas[::-1]


def empirical_tradeoff(scores_p, scores_q, level: float = 0.99,
                       grid_size: int = DEFAULT_GRID_SIZE) -> EmpiricalTradeoff:
    """Empirical trade-off of thresholding a score that tends to be larger under Q."""
    scores_p = np.asarray(scores_p, dtype=float).ravel()
    scores_q = np.asarray(scores_q, dtype=float).ravel()
    if not 0.0 < level < 1.0:
        raise DomainError(f"level must lie in (0, 1), got {level}")
    n = min(len(scores_p), len(scores_q))
    # split the miss probability between the two bands
    band_p = dkw_width(len(scores_p), 1.0 - (1.0 - level) / 2.0)
    band_q = dkw_width(len(scores_q), 1.0 - (1.0 - level) / 2.0)
    if np.all(scores_p == scores_p[0]) and np.all(scores_q == scores_p[0]):
        warnings.warn("score is constant across samples; returning the identity curve", stacklevel=2)
        curve = identity_curve(grid_size, flags=("degenerate-score",))
        return EmpiricalTradeoff(
            curve, np.array([0.0, 1.0]), np.array([1.0, 0.0]), band_p, band_q, level, n, ("degenerate-score",)
        )
    alphas, betas = _roc(scores_p, scores_q)
    # the hull only needs a thinned vertex set; the band checks use every threshold
    if len(alphas) > _MAX_VERTICES:
        keep = np.unique(np.linspace(0, len(alphas) - 1, _MAX_VERTICES).astype(int))
        ha, hb = alphas[keep], betas[keep]
    else:
        ha, hb = alphas, betas
    ha, idx = np.unique(ha, return_index=True)
    hb = np.minimum.reduceat(hb, idx) if len(idx) > 1 else hb[idx]
    if ha[0] > 0.0:
        ha, hb = np.insert(ha, 0, 0.0), np.insert(hb, 0, 1.0)
    curve = from_points(ha, hb, grid=default_grid(grid_size))
    return EmpiricalTradeoff(curve, alphas, betas, band_p, band_q, level, n)


def mc_estimate_tradeoff(sampler_p: Sampler, sampler_q: Sampler, n_samples: int,
                         score: Callable[[np.ndarray], np.ndarray] | None = None,
                         seed: int | None = None, level: float = 0.99,
                         grid_size: int = DEFAULT_GRID_SIZE) -> EmpiricalTradeoff:
    """Estimate the trade-off between two black-box samplers.

    Each sampler maps ``(n, rng)`` to ``n`` outcomes.  ``score`` maps outcomes
    to a statistic that tends to be larger under Q; without it the outcomes
    themselves must be scalars and serve as the statistic.
    """
    if n_samples < MIN_SAMPLES:
        raise DomainError(f"n_samples must be >= {MIN_SAMPLES}, got {n_samples}")
    rng_p, rng_q = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
    out_p = sampler_p(n_samples, rng_p)
    out_q = sampler_q(n_samples, rng_q)
    if score is not None:
        out_p, out_q = score(out_p), score(out_q)
    return empirical_tradeoff(out_p, out_q, level, grid_size)


def mc_estimate_pair(pair: DominatingPair, n_samples: int, seed: int | None = None,
                     level: float = 0.99, grid_size: int = DEFAULT_GRID_SIZE) -> EmpiricalTradeoff:
    """Monte-Carlo trade-off of a pair, scored by its log-likelihood ratio."""
    return mc_estimate_tradeoff(pair.sample_p, pair.sample_q, n_samples, score=pair.llr,
                                seed=seed, level=level, grid_size=grid_size)
