import math

import numpy as np
import pytest

from featuredp.errors import DomainError
from featuredp.tradeoff import (
    DominatingPair,
    dkw_width,
    empirical_tradeoff,
    gaussian_tradeoff,
    mc_estimate_pair,
    mc_estimate_tradeoff,
)


def test_dkw_width_formula():
    assert dkw_width(10_000, 0.99) == pytest.approx(math.sqrt(math.log(200.0) / 20_000))


def test_gaussian_pair_consistent_with_its_curve():
    emp = mc_estimate_pair(DominatingPair.gaussian(1.0), 100_000, seed=3)
    assert emp.consistent_with(gaussian_tradeoff(1.0))


def test_band_rejects_wrong_curve():
    emp = mc_estimate_pair(DominatingPair.gaussian(1.0), 100_000, seed=3)
    assert not emp.consistent_with(gaussian_tradeoff(1.5))
    assert not emp.consistent_with(gaussian_tradeoff(0.5))
    # a weaker reference is still a valid lower bound
    assert emp.not_below(gaussian_tradeoff(1.5))


def test_estimate_is_reproducible():
    a = mc_estimate_pair(DominatingPair.gaussian(0.7), 20_000, seed=11)
    b = mc_estimate_pair(DominatingPair.gaussian(0.7), 20_000, seed=11)
    assert np.array_equal(a.alphas, b.alphas) and np.array_equal(a.betas, b.betas)


def test_too_few_samples_rejected():
    with pytest.raises(DomainError):
        mc_estimate_pair(DominatingPair.gaussian(1.0), 100, seed=0)


def test_constant_score_gives_identity():
    with pytest.warns(UserWarning):
        emp = empirical_tradeoff(np.zeros(50), np.zeros(50))
    assert "degenerate-score" in emp.flags
    assert emp.curve(0.3) == pytest.approx(0.7)


def test_black_box_samplers_with_score():
    emp = mc_estimate_tradeoff(
        lambda n, rng: rng.normal(0.0, 1.0, (n, 2)),
        lambda n, rng: rng.normal(0.5, 1.0, (n, 2)),
        50_000, score=lambda o: o.sum(axis=1), seed=1,
    )
    # the sum of two coordinates is the optimal statistic: mu = 0.5 * sqrt(2)
    assert emp.consistent_with(gaussian_tradeoff(0.5 * math.sqrt(2)))


def test_level_domain():
    with pytest.raises(DomainError):
        empirical_tradeoff(np.arange(3.0), np.arange(3.0), level=1.0)
