"""Discretized privacy-loss distributions and their composition.

A dominating pair ``(P, Q)`` is summarized by the distribution of the
privacy loss ``L = log(q/p)`` under ``Q``.  Single pairs are discretized on
the lattice ``k * interval`` so that the discrete hockey-stick curve
``delta(eps)`` interpolates the exact one linearly in ``e^eps``.  Because
``delta`` is convex in ``e^eps`` the interpolant lies above the exact curve,
so every quantity reported from the discrete distribution is an upper bound
on the privacy loss.  Composition is convolution on the shared lattice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import fft, signal, special

from featuredp.errors import AccuracyError, DomainError
from featuredp.tradeoff.curve import INFINITE_EPSILON, TradeoffCurve, default_grid, from_points
from featuredp.tradeoff.pairs import DominatingPair, _quantile_bounds, _solve_llr

DEFAULT_INTERVAL = 1e-3
MIN_INTERVAL = 1e-5
TRUNCATION_BUDGET = 1e-12
_PAIR_TAIL = 1e-18
_CONV_TAIL = 1e-15
_MAX_BINS = 1 << 24
_ULP = 2.0**-52
# losses beyond this many nats are charged as infinite (above) or merged into the first bin (below)
LOSS_CAP = 60.0


@dataclass(frozen=True, eq=False)
class PrivacyLossDistribution:
    """Masses of the privacy loss under Q on the lattice ``(offset + i) * interval``."""

    interval: float
    offset: int
    probs: np.ndarray
    inf_mass: float = 0.0
    truncated: float = 0.0

    @property
    def losses(self) -> np.ndarray:
        return (self.offset + np.arange(len(self.probs))) * self.interval

    def loss_std(self) -> float:
        """Standard deviation of the finite part of the loss under Q."""
        w = self.probs / self.probs.sum()
        l = self.losses
        mean = float(np.dot(w, l))
        return math.sqrt(max(float(np.dot(w, (l - mean) ** 2)), 0.0))

    # -- construction ------------------------------------------------------
    @classmethod
    def from_pair(cls, pair: DominatingPair, interval: float = DEFAULT_INTERVAL) -> "PrivacyLossDistribution":
        if interval <= 0:
            raise DomainError("interval must be positive")
        if pair.discrete:
            tails = _discrete_tails(pair, interval)
        else:
            tails = _continuous_tails(pair, interval)
        return cls._connect_the_dots(interval, *tails)

    @classmethod
    def _connect_the_dots(cls, h, k_lo, p_tail, q_tail, q_low):
        """Masses whose hockey-stick curve interpolates the exact one at the lattice.

        ``p_tail[k]`` and ``q_tail[k]`` are P(L > eps_k) and Q(L > eps_k) for
        ``eps_k = (k_lo + k) h``; ``q_low`` is Q(L <= eps_0).
        """
        n = len(p_tail)
        y = np.exp((k_lo + np.arange(n)) * h)
        if n == 1:
            # degenerate pair: the loss is constant
            probs = np.array([1.0 - q_tail[0]])
            return cls(h, k_lo, probs, float(max(q_tail[0] - y[0] * p_tail[0], 0.0)))
        pb = np.clip(p_tail[:-1] - p_tail[1:], 0.0, None)
        qb = np.clip(q_tail[:-1] - q_tail[1:], 0.0, None)
        slope = (pb - qb / y[:-1]) / math.expm1(h)
        probs = np.empty(n)
        probs[0] = y[0] * (slope[0] + pb[0]) + q_low
        probs[1:-1] = y[1:-1] * (slope[1:] - slope[:-1] + pb[1:])
        probs[-1] = y[-1] * (p_tail[-1] - slope[-1])
        probs = np.clip(probs, 0.0, None)
        inf_mass = float(max(q_tail[-1] - y[-1] * p_tail[-1], 0.0))
        total = float(probs.sum()) + inf_mass
        # two nested differences of tails cost a factor 1/h each in relative rounding
        if abs(total - 1.0) > 1e-9 + 16.0 * _ULP / h**2:
            raise AccuracyError(f"discretized loss has total mass {total!r}; the pair tails are inconsistent")
        # clipped rounding noise stays in place: extra mass can only raise delta
        return cls(h, k_lo, probs, inf_mass)._trim()

    # -- composition -------------------------------------------------------
    def compose(self, other: "PrivacyLossDistribution") -> "PrivacyLossDistribution":
        if not math.isclose(self.interval, other.interval, rel_tol=1e-12):
            raise DomainError("cannot compose distributions on different lattices")
        if len(self.probs) * len(other.probs) < 250_000:
            probs = np.convolve(self.probs, other.probs)
        else:
            probs = signal.fftconvolve(self.probs, other.probs)
        probs = np.clip(probs, 0.0, None)
        inf_mass = 1.0 - (1.0 - self.inf_mass) * (1.0 - other.inf_mass)
        out = PrivacyLossDistribution(
            self.interval, self.offset + other.offset, probs, inf_mass, self.truncated + other.truncated
        )
        return out._trim(_CONV_TAIL)

    def self_compose(self, times: int) -> "PrivacyLossDistribution":
        """``times``-fold composition with itself by one FFT power.

        The output window is fixed in advance by Chernoff bounds on both tails
        of the summed loss.  Mass beyond the upper end is charged to the
        infinite-loss atom and mass below the lower end is moved up into the
        first bin, so the result stays pessimistic.
        """
        if int(times) != times or times < 1:
            raise DomainError("times must be a positive integer")
        if times == 1:
            return self
        n = len(self.probs)
        j = np.arange(n)
        lo_j, lo_mass = _chernoff_index(self.probs, j, times, -1, _CONV_TAIL)
        hi_j, hi_mass = _chernoff_index(self.probs, j, times, 1, _CONV_TAIL)
        lo_j = max(lo_j, 0)
        hi_j = min(hi_j, times * (n - 1))
        width = hi_j - lo_j + 1
        if width > _MAX_BINS:
            raise AccuracyError(
                f"composed loss needs {width} bins of width {self.interval:g}; use a coarser interval"
            )
        size = fft.next_fast_len(width, real=True)
        folded = np.bincount(j % size, weights=self.probs, minlength=size)
        raw = fft.irfft(fft.rfft(folded) ** times, size)
        probs = np.clip(raw[(lo_j + np.arange(width)) % size], 0.0, None)
        probs[0] += lo_mass
        inf_mass = 1.0 - (1.0 - self.inf_mass) ** times + hi_mass
        truncated = self.truncated * times + hi_mass
        if truncated > TRUNCATION_BUDGET:
            raise AccuracyError(f"truncated mass {truncated:.3e} exceeds budget {TRUNCATION_BUDGET:.0e}")
        out = PrivacyLossDistribution(self.interval, times * self.offset + lo_j, probs, inf_mass, truncated)
        return out._trim()

    def _trim(self, tail: float = 0.0) -> "PrivacyLossDistribution":
        """Drop negligible tails: low tail moves up one bin set, high tail becomes infinite loss."""
        p = self.probs
        nz = np.flatnonzero(p)
        if len(nz) == 0:
            return PrivacyLossDistribution(self.interval, self.offset, np.zeros(1), self.inf_mass, self.truncated)
        lo, hi = nz[0], nz[-1]
        extra_inf = 0.0
        if tail > 0:
            csum = np.cumsum(p)
            lo = max(lo, int(np.searchsorted(csum, tail, side="right")))
            rsum = np.cumsum(p[::-1])
            drop_hi = int(np.searchsorted(rsum, tail, side="right"))
            hi = min(hi, len(p) - 1 - drop_hi)
            if hi < lo:
                lo = hi = int(np.argmax(p))
            extra_inf = float(p[hi + 1:].sum())
            low_mass = float(p[:lo].sum())
        else:
            low_mass = 0.0
        probs = p[lo:hi + 1].copy()
        # moving low-loss mass up is pessimistic and keeps Q normalized
        probs[0] += low_mass
        truncated = self.truncated + extra_inf
        if truncated > TRUNCATION_BUDGET:
            raise AccuracyError(
                f"truncated mass {truncated:.3e} exceeds budget {TRUNCATION_BUDGET:.0e}; "
                "use a coarser composition or a larger budget"
            )
        return PrivacyLossDistribution(
            self.interval, self.offset + lo, probs, self.inf_mass + extra_inf, truncated
        )

    # -- queries -------------------------------------------------------------
    def _tail_sums(self):
        l = self.losses
        q = self.probs
        with np.errstate(over="ignore"):
            w = q * np.exp(-l)
        # sums over atoms with loss strictly greater than losses[i]
        q_gt = np.concatenate((np.cumsum(q[::-1])[::-1][1:], [0.0]))
        w_gt = np.concatenate((np.cumsum(w[::-1])[::-1][1:], [0.0]))
        return l, q_gt, w_gt

    def delta_for_epsilon(self, epsilon: float) -> float:
        l, q = self.losses, self.probs
        mask = l > epsilon
        w = q[mask] * np.exp(epsilon - l[mask])
        return float(self.inf_mass + np.sum(q[mask] - w))

    def epsilon_for_delta(self, delta: float) -> float:
        """Smallest epsilon >= 0 with delta(epsilon) <= delta."""
        if not 0.0 <= delta <= 1.0:
            raise DomainError(f"delta must lie in [0, 1], got {delta}")
        if self.inf_mass > delta:
            return INFINITE_EPSILON
        if self.delta_for_epsilon(0.0) <= delta:
            return 0.0
        l, q_gt, w_gt = self._tail_sums()
        # delta at each lattice point, non-increasing in the loss
        with np.errstate(over="ignore", invalid="ignore"):
            d = self.inf_mass + q_gt - np.exp(l) * w_gt
        j = int(np.searchsorted(-d, -delta, side="left"))
        # on (l[j-1], l[j]] the curve is inf + A - e^eps B with constant A, B
        a = self.inf_mass + q_gt[j - 1] - delta
        b = w_gt[j - 1]
        eps = math.log(a / b) if b > 0 and a > 0 else l[j]
        return max(0.0, min(eps, float(l[j])))

    def to_curve(self, grid_size: int | None = None, grid=None) -> TradeoffCurve:
        """Trade-off curve of the discrete pair this distribution describes."""
        if grid is None:
            grid = default_grid(grid_size or 4096)
        l = self.losses[::-1]
        q = self.probs[::-1]
        keep = q > 0
        l, q = l[keep], q[keep]
        p = np.exp(np.log(q) - l)
        alphas = np.concatenate(([0.0], np.cumsum(p)))
        betas = np.concatenate((np.cumsum(q[::-1])[::-1], [0.0]))
        if alphas[-1] < 1.0:
            alphas = np.append(alphas, 1.0)
            betas = np.append(betas, 0.0)
        else:
            alphas[-1] = 1.0
        alphas, idx = np.unique(alphas, return_index=True)
        betas = betas[idx]
        # the vertices are convex up to rounding; the hull removes the rounding
        return from_points(grid, np.interp(grid, alphas, betas))


def _continuous_tails(pair: DominatingPair, h: float):
    inc = pair.lr_increasing()
    x_lo, x_hi = _quantile_bounds(pair, _PAIR_TAIL)
    l_ends = pair.llr(np.array([x_lo, x_hi]))
    l_min, l_max = float(np.min(l_ends)), float(np.max(l_ends))
    l_min, l_max = max(l_min, -LOSS_CAP), min(l_max, LOSS_CAP)
    k_lo = math.floor(l_min / h)
    k_hi = max(math.ceil(l_max / h), k_lo + 1)
    eps = (k_lo + np.arange(k_hi - k_lo + 1)) * h
    x = _solve_llr(pair, eps, inc)
    if inc:
        # L > eps  <=>  x > x(eps)
        p_tail, q_tail = pair.dist_p.sf(x), pair.dist_q.sf(x)
        q_low = float(pair.dist_q.cdf(x[0]))
    else:
        p_tail, q_tail = pair.dist_p.cdf(x), pair.dist_q.cdf(x)
        q_low = float(pair.dist_q.sf(x[0]))
    return k_lo, np.asarray(p_tail, float), np.asarray(q_tail, float), q_low


def _discrete_tails(pair: DominatingPair, h: float):
    _, pp, pq = pair.pmfs()
    with np.errstate(divide="ignore", invalid="ignore"):
        llr = np.log(pq) - np.log(pp)
    finite = np.isfinite(llr)
    if not np.any(finite):
        raise DomainError("discrete pair has no atom charged by both distributions")
    k_lo = math.floor(max(llr[finite].min(), -LOSS_CAP) / h)
    k_hi = max(math.ceil(min(llr[finite].max(), LOSS_CAP) / h), k_lo + 1)
    eps = (k_lo + np.arange(k_hi - k_lo + 1)) * h
    # atoms sitting exactly on a lattice point belong to the bin ending there
    above = llr[None, :] > eps[:, None] + 1e-9 * h
    p_tail = (above * pp).sum(axis=1)
    q_tail = (above * pq).sum(axis=1)
    q_low = float(pq[(llr <= eps[0] + 1e-9 * h) | (np.isneginf(llr))].sum())
    return k_lo, p_tail, q_tail, q_low


def suggest_interval(pairs_with_counts) -> float:
    """Lattice width keeping the composed epsilon error near 1e-4.

    The interpolation error of a composition of ``T`` steps grows roughly
    like ``T h^2 / (100 s)`` with ``s`` the per-step loss spread, so ``h`` is
    set from the narrowest pair and capped at ``DEFAULT_INTERVAL``.
    """
    total = sum(count for _, count in pairs_with_counts)
    interval = DEFAULT_INTERVAL
    for pair, _ in pairs_with_counts:
        spread = PrivacyLossDistribution.from_pair(pair, DEFAULT_INTERVAL).loss_std()
        spread = max(spread, DEFAULT_INTERVAL)
        interval = min(interval, math.sqrt(0.01 * spread / total))
    return max(interval, MIN_INTERVAL)


def _chernoff_index(probs: np.ndarray, idx: np.ndarray, times: int, side: int, tail: float):
    """Lattice index beyond which the ``times``-fold sum has at most ``tail`` mass.

    Returns the index together with the proven bound on the mass beyond it.
    ``side`` is +1 for the upper tail and -1 for the lower tail.
    """
    keep = probs > 0
    log_p, pos = np.log(probs[keep]), idx[keep].astype(float)
    centre = times * float(np.sum(probs[keep] * pos) / np.sum(probs[keep]))
    best = times * (pos.max() if side > 0 else pos.min())
    # tilts per lattice step; spanning small to large covers light and heavy tails
    for lam in np.geomspace(1e-6, 10.0, 60):
        log_mgf = special.logsumexp(log_p + side * lam * (pos - pos.mean()))
        shift = (times * log_mgf - math.log(tail)) / lam
        bound = times * pos.mean() + side * shift
        best = min(best, bound) if side > 0 else max(best, bound)
    if side > 0:
        return max(int(math.ceil(best)), int(math.floor(centre))), tail
    return min(int(math.floor(best)), int(math.ceil(centre))), tail
