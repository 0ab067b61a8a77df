"""Trade-off curves, dominating pairs, composition and accounting."""

from featuredp.tradeoff.accountant import (
    CalibratedSigma,
    MechanismSpec,
    accounted_curve,
    calibrate_sigma,
    compose,
    compose_pld,
    epsilon_for,
    subsampled_gaussian_tradeoff,
)
from featuredp.tradeoff.curve import (
    DEFAULT_GRID_SIZE,
    GRID_VERSION,
    INFINITE_EPSILON,
    SCHEMA_VERSION,
    PrivacyParams,
    TradeoffCurve,
    default_grid,
    from_points,
    gaussian_tradeoff,
    identity_curve,
    linear_curve,
    pointwise_min,
    sup_distance,
    symmetrize,
    to_epsilon,
)
from featuredp.tradeoff.montecarlo import (
    EmpiricalTradeoff,
    dkw_width,
    empirical_tradeoff,
    mc_estimate_pair,
    mc_estimate_tradeoff,
)
from featuredp.tradeoff.pairs import DominatingPair, GaussianMixture, hockey_stick, tradeoff_from_pair
from featuredp.tradeoff.pld import PrivacyLossDistribution

__all__ = [
    "CalibratedSigma", "DEFAULT_GRID_SIZE", "DominatingPair", "EmpiricalTradeoff", "GRID_VERSION",
    "GaussianMixture", "INFINITE_EPSILON", "MechanismSpec", "PrivacyLossDistribution", "PrivacyParams",
    "SCHEMA_VERSION", "TradeoffCurve", "accounted_curve", "calibrate_sigma", "compose", "compose_pld",
    "default_grid", "dkw_width", "empirical_tradeoff", "epsilon_for", "from_points", "gaussian_tradeoff",
    "hockey_stick", "identity_curve", "linear_curve", "mc_estimate_pair", "mc_estimate_tradeoff",
    "pointwise_min", "subsampled_gaussian_tradeoff", "sup_distance", "symmetrize", "to_epsilon",
    "tradeoff_from_pair",
]
