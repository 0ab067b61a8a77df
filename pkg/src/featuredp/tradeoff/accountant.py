"""Privacy accounting for the subsampled Gaussian mechanism.

Accounting is symmetric: a run is charged the worse of the two hypothesis
orders, which for curves means the convex hull of ``min(f, f^-1)`` and for
``(epsilon, delta)`` queries means the larger epsilon of the two orders.
"""

from __future__ import annotations

import functools
import math
import warnings
from collections import OrderedDict
from dataclasses import dataclass
from typing import Sequence

from featuredp.errors import CalibrationError, DomainError
from featuredp.tradeoff.curve import (
    DEFAULT_GRID_SIZE,
    PrivacyParams,
    TradeoffCurve,
    gaussian_tradeoff,
    identity_curve,
    symmetrize,
)
from featuredp.tradeoff.pairs import DominatingPair, tradeoff_from_pair
from featuredp.tradeoff.pld import PrivacyLossDistribution, suggest_interval

# stop once the achieved epsilon is this close below the target
_CALIBRATION_SLACK = 2.5e-4
_SIGMA_BRACKET = (1e-2, 1e4)


@dataclass(frozen=True)
class MechanismSpec:
    """Subsampled Gaussian mechanism run for ``steps`` rounds."""

    sensitivity: float
    sigma: float
    sampling_prob: float = 1.0
    steps: int = 1

    def __post_init__(self):
        if not self.sensitivity >= 0:
            raise DomainError(f"sensitivity must be >= 0, got {self.sensitivity}")
        if not self.sigma > 0:
            raise DomainError(f"sigma must be > 0, got {self.sigma}")
        if not 0.0 <= self.sampling_prob <= 1.0:
            raise DomainError(f"sampling_prob must lie in [0, 1], got {self.sampling_prob}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise DomainError(f"steps must be a positive integer, got {self.steps}")

    @property
    def noise_multiplier(self) -> float:
        return self.sigma / self.sensitivity if self.sensitivity > 0 else math.inf

    @property
    def trivial(self) -> bool:
        return self.sampling_prob == 0.0 or self.sensitivity == 0.0

    def pair(self) -> DominatingPair:
        if self.sampling_prob == 1.0:
            return DominatingPair.gaussian(self.sensitivity / self.sigma)
        return DominatingPair.subsampled_gaussian(self.sensitivity, self.sigma, self.sampling_prob)


def subsampled_gaussian_tradeoff(spec: MechanismSpec, grid_size: int = DEFAULT_GRID_SIZE) -> TradeoffCurve:
    """Single-step curve T(N(0, sigma), (1 - p) N(0, sigma) + p N(sensitivity, sigma))."""
    if spec.steps != 1:
        raise DomainError("subsampled_gaussian_tradeoff describes one step; use accounted_curve")
    if spec.trivial:
        return identity_curve(grid_size)
    if spec.sampling_prob == 1.0:
        return gaussian_tradeoff(spec.sensitivity / spec.sigma, grid_size)
    return tradeoff_from_pair(spec.pair(), grid_size)


def compose_pld(pairs: Sequence[DominatingPair], interval: float | None = None) -> PrivacyLossDistribution:
    """Privacy-loss distribution of the product of ``pairs``.

    Repeated occurrences of the same pair object are composed in one step.
    With ``interval=None`` the lattice width is chosen by ``suggest_interval``.
    """
    if not pairs:
        raise DomainError("compose needs at least one pair")
    counts: OrderedDict[int, list] = OrderedDict()
    for pair in pairs:
        counts.setdefault(id(pair), [pair, 0])[1] += 1
    if interval is None:
        interval = suggest_interval(list(counts.values()))
    result = None
    for pair, count in counts.values():
        pld = PrivacyLossDistribution.from_pair(pair, interval).self_compose(count)
        result = pld if result is None else result.compose(pld)
    return result


def compose(pairs: Sequence[DominatingPair], grid_size: int = DEFAULT_GRID_SIZE,
            interval: float | None = None) -> TradeoffCurve:
    """Trade-off curve of the product distributions of ``pairs``."""
    return compose_pld(pairs, interval).to_curve(grid_size)


@functools.lru_cache(maxsize=32)
def _directional_plds(spec: MechanismSpec) -> tuple[PrivacyLossDistribution, PrivacyLossDistribution]:
    pair = spec.pair()
    forward = compose_pld([pair] * spec.steps)
    backward = compose_pld([pair.swapped()] * spec.steps)
    return forward, backward


def accounted_curve(spec: MechanismSpec, grid_size: int = DEFAULT_GRID_SIZE) -> TradeoffCurve:
    """Symmetrized trade-off curve of ``spec.steps`` composed rounds."""
    if spec.trivial:
        return identity_curve(grid_size)
    forward, _ = _directional_plds(spec)
    return symmetrize(forward.to_curve(grid_size))


def epsilon_for(spec: MechanismSpec, delta: float) -> float:
    """Epsilon of the symmetrized composed curve at ``delta``."""
    if not 0.0 <= delta < 1.0:
        raise DomainError(f"delta must lie in [0, 1), got {delta}")
    if spec.trivial:
        return 0.0
    forward, backward = _directional_plds(spec)
    return max(forward.epsilon_for_delta(delta), backward.epsilon_for_delta(delta))


class CalibratedSigma(float):
    """A noise scale that also records the epsilon it achieves and any flags."""

    achieved_epsilon: float
    flags: tuple[str, ...]

    def __new__(cls, value: float, achieved_epsilon: float, flags: tuple[str, ...] = ()):
        obj = super().__new__(cls, value)
        obj.achieved_epsilon = achieved_epsilon
        obj.flags = flags
        return obj


def calibrate_sigma(target: PrivacyParams, sampling_prob: float, steps: int,
                    sensitivity: float = 1.0) -> CalibratedSigma:
    """Smallest noise standard deviation meeting ``target`` over ``steps`` rounds.

    The search runs on the noise multiplier (sigma / sensitivity) because the
    mechanism depends on the two only through their ratio, then scales back.
    """
    if not target.epsilon > 0:
        raise DomainError("target epsilon must be > 0")
    if not 0.0 < target.delta < 1.0:
        raise DomainError("target delta must lie in (0, 1)")
    if not sensitivity > 0:
        raise DomainError("sensitivity must be > 0")
    lo_limit, hi_limit = _SIGMA_BRACKET

    def eps_at(multiplier: float) -> float:
        return epsilon_for(MechanismSpec(1.0, multiplier, sampling_prob, steps), target.delta)

    if sampling_prob == 0.0:
        warnings.warn("sampling_prob = 0 touches no data; returning the bracket minimum", stacklevel=2)
        return CalibratedSigma(lo_limit * sensitivity, 0.0, ("no-privacy-loss",))
    # grow a bracket outward from multiplier 1; tiny multipliers are costly to account
    lo, hi = 1.0, 1.0
    eps_hi = eps_at(hi)
    while eps_hi > target.epsilon:
        if hi >= hi_limit:
            raise CalibrationError(
                f"epsilon {eps_hi:.4g} at the largest multiplier {hi:g} still exceeds "
                f"target {target.epsilon:g}",
                bracket=(lo_limit, hi_limit),
            )
        lo, hi = hi, min(2.0 * hi, hi_limit)
        eps_hi = eps_at(hi)
    if lo == hi:
        while True:
            lo = lo / 2.0
            eps_lo = eps_at(lo)
            if eps_lo > target.epsilon:
                break
            hi, eps_hi = lo, eps_lo
            if lo <= lo_limit:
                return CalibratedSigma(lo * sensitivity, eps_lo, ("bracket-minimum",))
    # bisection in log-space; hi always satisfies the target
    while True:
        if target.epsilon - eps_hi <= _CALIBRATION_SLACK or hi / lo - 1.0 < 1e-9:
            return CalibratedSigma(hi * sensitivity, eps_hi)
        mid = math.sqrt(lo * hi)
        eps_mid = eps_at(mid)
        if eps_mid <= target.epsilon:
            hi, eps_hi = mid, eps_mid
        else:
            lo = mid
