import csv
import io
import itertools
import math

import numpy as np
import pytest

from featuredp.audit import (
    AttackSetup,
    ScalarProblem,
    attribute_inference_advantage,
    attribute_suite,
    check_attribute_bound,
    constant_mechanism,
    distinguishing_game,
    estimate_ball,
    nonamplification_demo,
    wilson_interval,
)
from featuredp.errors import AttackError, DomainError
from featuredp.mechanisms import BitRecord, MechanismInstance, SimulatorInstance, get_mechanism, outcome_pair
from featuredp.sgd import TrainConfig
from featuredp.tradeoff import TradeoffCurve, identity_curve, tradeoff_from_pair

LN2 = math.log(2.0)


def hamming(x, y):
    return sum(a != b for a, b in zip(x.bits, y.bits))


def cube_setup(radius):
    prior = {BitRecord(b): 1 / 8 for b in itertools.product((0, 1), repeat=3)}
    return AttackSetup(prior, (), lambda r: (), hamming, radius)


def first_bit_setup(q=0.5, radius=0.0, adversary=None):
    prior = {BitRecord((1, 1)): q, BitRecord((0, 1)): 1 - q, BitRecord((0, 0)): 0.0}
    return AttackSetup(prior, (1,), lambda r: r.public, hamming, radius, adversary)


# --- ball ----------------------------------------------------------------------


def test_ball_on_the_cube():
    assert estimate_ball(cube_setup(0)).value == pytest.approx(1 / 8)
    assert estimate_ball(cube_setup(1)).value == pytest.approx(0.5)


def test_ball_of_point_mass_is_one():
    setup = AttackSetup({BitRecord((1, 1)): 1.0}, (1,), lambda r: r.public, hamming, 0.0)
    assert estimate_ball(setup).value == 1.0


def test_sampled_ball_has_interval():
    setup = AttackSetup(lambda n, rng: [BitRecord(tuple(r)) for r in rng.integers(0, 2, (n, 3))],
                        (), lambda r: (), hamming, 1)
    ball = estimate_ball(setup, n_samples=20_000, seed=1)
    assert ball.ci[0] <= 0.5 <= ball.ci[1]
    assert np.isclose(ball.value, 0.5, atol=0.02)


def test_setup_validation():
    with pytest.raises(DomainError):
        cube_setup(-1)
    with pytest.raises(DomainError, match="sum to 1"):
        AttackSetup({BitRecord((0,)): 0.5}, (), lambda r: (), hamming, 0)
    with pytest.raises(DomainError, match="public value"):
        AttackSetup({BitRecord((0, 0)): 1.0}, (1,), lambda r: r.public, hamming, 0)


# --- advantage -------------------------------------------------------------------


def test_bayes_advantage_on_randomized_response():
    mech, _ = get_mechanism("rr", epsilon=LN2)
    adv = attribute_inference_advantage(first_bit_setup(), mech, [])
    assert adv.mode == "exact"
    assert adv.value == pytest.approx(0.8, abs=1e-12)


def test_ball_center_adversary_matches_ball():
    mech, _ = get_mechanism("rr", epsilon=LN2)
    setup = first_bit_setup(0.7, adversary=lambda o: BitRecord((1, 1)))
    assert attribute_inference_advantage(setup, mech, []).value == pytest.approx(estimate_ball(setup).value)


def test_verbatim_release_gives_full_advantage():
    verbatim = MechanismInstance("verbatim", lambda d, s: d[-1], "the record", lambda d: {d[-1]: 1.0})
    assert attribute_inference_advantage(first_bit_setup(0.6), verbatim, []).value == pytest.approx(1.0)


def test_exact_and_sampled_advantage_agree():
    mech, _ = get_mechanism("rr", epsilon=LN2)
    guess = lambda o: BitRecord((o[0][0], 1))
    exact = attribute_inference_advantage(first_bit_setup(0.6, adversary=guess), mech, [])
    mc = attribute_inference_advantage(first_bit_setup(0.6, adversary=guess), mech, [], trials=20_000, seed=4)
    assert mc.mode == "monte-carlo"
    assert mc.lower <= exact.value <= mc.upper


def test_out_of_domain_guess_is_an_attack_error():
    mech, _ = get_mechanism("rr", epsilon=LN2)
    with pytest.raises(AttackError):
        attribute_inference_advantage(first_bit_setup(adversary=lambda o: BitRecord((1, 1, 1))), mech, [])


def test_sampled_mode_needs_adversary():
    mech, _ = get_mechanism("rr", epsilon=LN2)
    with pytest.raises(DomainError, match="adversary"):
        attribute_inference_advantage(first_bit_setup(), mech, [], trials=100)


def test_wilson_interval():
    lo, hi = wilson_interval(50, 100)
    assert lo < 0.5 < hi and hi - lo < 0.3
    assert wilson_interval(0, 10)[0] == 0.0
    with pytest.raises(DomainError):
        wilson_interval(0, 0)


# --- the bound -------------------------------------------------------------------


def test_constant_mechanism_is_tight_at_identity():
    report = check_attribute_bound(first_bit_setup(0.9), constant_mechanism(), identity_curve(), [])
    assert report.passed
    assert report.advantage.value == pytest.approx(report.bound)


def test_non_convex_curve_refused():
    bad = TradeoffCurve.__new__(TradeoffCurve)
    # bypass construction-time validation to mimic a curve built elsewhere
    object.__setattr__(bad, "alphas", np.array([0.0, 0.25, 0.5, 1.0]))
    object.__setattr__(bad, "betas", np.array([0.5, 0.5, 0.1, 0.0]))
    mech, _ = get_mechanism("rr", epsilon=LN2)
    with pytest.raises(DomainError, match="refused"):
        check_attribute_bound(first_bit_setup(), mech, bad, [])


def test_scalar_replacement_bound_holds():
    problem = ScalarProblem(cfg=TrainConfig(priv_batch_expected=1, pub_batch=2, steps=1, sigma=1.0, lr=1.0))
    setup = AttackSetup({-1.0: 0.5, 1.0: 0.5}, (), lambda z: (), lambda a, b: abs(a - b), 0.0)
    report = check_attribute_bound(setup, problem.mechanism(), problem.replacement_curve(), [0.5])
    assert report.advantage.mode == "quadrature"
    assert report.passed and 0.5 < report.advantage.value < report.bound
    assert report.to_json()["schema_version"]


def test_suite_passes_with_true_curves():
    results = attribute_suite()
    assert len(results) == 20
    assert all(r.passed for _, r in results)


def test_suite_has_power_against_understated_curves():
    assert any(not r.passed for _, r in attribute_suite(understate=2.0))


# --- distinguishing ----------------------------------------------------------------


def test_simulator_equal_to_mechanism_is_indistinguishable():
    mech, _ = get_mechanism("rr", epsilon=LN2)
    x = BitRecord((1, 1))
    cheat = SimulatorInstance("cheat", lambda data, pub, s: mech.run(list(data) + [x], s),
                              lambda data, pub: mech.enumerate(list(data) + [x]))
    # the log-ratio is identically zero, so the score is degenerate
    with pytest.warns(UserWarning, match="constant"):
        game = distinguishing_game(mech, cheat, x, [], 20_000, lambda r: r.public, seed=2)
    assert game.empirical.consistent_with(identity_curve())


def test_rr_game_matches_enumerated_curve():
    mech, sim = get_mechanism("rr", epsilon=LN2)
    x = BitRecord((1, 1))
    exact = tradeoff_from_pair(outcome_pair(sim.enumerate([], x.public), mech.enumerate([x])))
    game = distinguishing_game(mech, sim, x, [], 20_000, lambda r: r.public, seed=3, reference=exact)
    assert game.empirical.consistent_with(exact)
    assert game.passed
    assert game.to_json()["schema_version"]


def test_game_without_score_needs_enumeration():
    mech, sim = get_mechanism("rr", epsilon=LN2)
    blind = MechanismInstance("blind", mech.run, "bits")
    with pytest.raises(DomainError):
        distinguishing_game(blind, sim, BitRecord((1, 1)), [], 100, lambda r: r.public)


# --- no amplification ----------------------------------------------------------------


def test_subsampling_does_not_amplify():
    table = nonamplification_demo(LN2, [0.1, 0.5, 1.0])
    tight = [r.tight_epsilon for r in table.rows]
    assert max(tight) - min(tight) <= 1e-9
    assert tight[-1] == pytest.approx(LN2)
    assert table.non_decreasing
    gauss = [r.gaussian_epsilon for r in table.rows]
    assert gauss[0] < gauss[1] < gauss[2]


@pytest.mark.parametrize("dims", [3, 4])
def test_nonamplification_ignores_dimension(dims):
    base = nonamplification_demo(LN2, [0.1, 0.5, 1.0], 2)
    other = nonamplification_demo(LN2, [0.1, 0.5, 1.0], dims)
    for a, b in zip(base.rows, other.rows):
        assert a.tight_epsilon == pytest.approx(b.tight_epsilon, abs=1e-12)


def test_nonamplification_outputs():
    table = nonamplification_demo(LN2, [0.5, 1.0])
    rows = list(csv.reader(io.StringIO(table.to_csv())))
    assert rows[0] == ["p", "tight_epsilon", "simulator_epsilon", "gaussian_epsilon"]
    assert len(rows) == 3
    doc = table.to_json()
    assert doc["schema_version"] and doc["non_decreasing"] is True
    with pytest.raises(DomainError):
        nonamplification_demo(0.0, [1.0])
    with pytest.raises(DomainError):
        nonamplification_demo(LN2, [0.0])
