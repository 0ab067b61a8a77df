"""Empirical checks of feature-level privacy claims.

Three families of checks live here:

* attribute inference: the advantage of an adversary reconstructing a
  withheld record from a release, compared against ``1 - f(Ball)``;
* distinguishing games between a mechanism and its simulator;
* the randomized-response construction on which Poisson subsampling buys
  no privacy, contrasted with the subsampled Gaussian mechanism.

A passing attribute-inference check is necessary, not sufficient: it covers
the adversaries tried, never all of them.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, Mapping, Sequence

import numpy as np
from scipy import integrate, stats

from featuredp.errors import AttackError, DomainError
from featuredp.mechanisms import (
    BitRecord,
    MechanismInstance,
    SimulatorInstance,
    get_mechanism,
    max_log_ratio,
    outcome_pair,
    rr_outcome_distribution,
    rr_simulator_distribution,
)
from featuredp.sgd.losses import Batch, LossSplit, PublicView, public_view, quadratic_split
from featuredp.sgd.train import TrainConfig, _clip_rows, filler_record, sample_one_step
from featuredp.tradeoff.accountant import MechanismSpec, calibrate_sigma, epsilon_for, subsampled_gaussian_tradeoff
from featuredp.tradeoff.curve import (
    SCHEMA_VERSION,
    PrivacyParams,
    TradeoffCurve,
    gaussian_tradeoff,
    identity_curve,
    linear_curve,
    symmetrize,
)
from featuredp.tradeoff.montecarlo import EmpiricalTradeoff, empirical_tradeoff
from featuredp.tradeoff.pairs import GaussianMixture, tradeoff_from_pair

EXACT_SLACK = 1e-9
QUADRATURE_SLACK = 1e-7
MAX_JOINT_STATES = 1 << 20
_CI_LEVEL = 0.99


# ---------------------------------------------------------------------------
# attack setup and the ball floor


@dataclass(frozen=True)
class AttackSetup:
    """Everything an attribute-inference adversary is given.

    ``prior`` is either a mapping from records to probabilities over a finite
    domain, or a sampler ``(n, rng) -> list of records``.  The adversary maps
    a release to a reconstructed record; ``None`` asks for the Bayes-optimal
    adversary, which is only available when outcomes can be enumerated.
    """

    prior: Mapping[Hashable, float] | Callable[[int, np.random.Generator], list]
    feature_value: Any
    public_fn: Callable[[Any], Any]
    metric: Callable[[Any, Any], float]
    radius: float
    adversary: Callable[[Any], Any] | None = None

    def __post_init__(self):
        if self.radius < 0:
            raise DomainError("radius must be >= 0")
        if self.finite:
            total = sum(self.prior.values())
            if abs(total - 1.0) > 1e-9:
                raise DomainError(f"prior must sum to 1, got {total}")
            if not self.conditional():
                raise DomainError("no record in the prior has the given public value")

    @property
    def finite(self) -> bool:
        return isinstance(self.prior, Mapping)

    def conditional(self) -> dict:
        """Prior restricted to records whose public part is ``feature_value``."""
        kept = {x: w for x, w in self.prior.items() if w > 0 and self.public_fn(x) == self.feature_value}
        total = sum(kept.values())
        return {x: w / total for x, w in kept.items()}

    def sample_conditional(self, n: int, rng: np.random.Generator, max_rounds: int = 1000) -> list:
        if self.finite:
            cond = self.conditional()
            keys = list(cond)
            idx = rng.choice(len(keys), size=n, p=np.array([cond[k] for k in keys]))
            return [keys[i] for i in idx]
        out: list = []
        for _ in range(max_rounds):
            out.extend(x for x in self.prior(max(n, 64), rng) if self.public_fn(x) == self.feature_value)
            if len(out) >= n:
                return out[:n]
        raise DomainError("the conditional prior given the public value looks empty")

    def in_domain(self, record) -> bool:
        if not self.finite:
            return True
        return record in self.prior


@dataclass(frozen=True)
class BallProfile:
    value: float
    argmax_center: Any
    ci: tuple[float, float] | None = None


def wilson_interval(successes: int, trials: int, level: float = _CI_LEVEL) -> tuple[float, float]:
    if trials <= 0:
        raise DomainError("trials must be >= 1")
    z = stats.norm.isf((1.0 - level) / 2.0)
    phat = successes / trials
    denom = 1.0 + z * z / trials
    centre = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def estimate_ball(setup: AttackSetup, n_samples: int = 20_000, seed: int = 0) -> BallProfile:
    """Largest conditional-prior mass of a ball of ``setup.radius`` around a supported center."""
    if setup.finite:
        cond = setup.conditional()
        best, center = -1.0, None
        for c in cond:
            mass = sum(w for x, w in cond.items() if setup.metric(c, x) <= setup.radius)
            if mass > best:
                best, center = mass, c
        return BallProfile(min(1.0, best), center)
    rng = np.random.default_rng(seed)
    draws = setup.sample_conditional(n_samples, rng)
    centers = draws[: min(200, len(draws))]
    best, center, hits = -1.0, None, 0
    for c in centers:
        k = sum(setup.metric(c, x) <= setup.radius for x in draws)
        if k / len(draws) > best:
            best, center, hits = k / len(draws), c, k
    return BallProfile(best, center, wilson_interval(hits, len(draws)))


# ---------------------------------------------------------------------------
# attribute inference


@dataclass(frozen=True)
class ContinuousMechanism:
    """Mechanism with scalar output whose density is known in closed form."""

    name: str
    run: Callable[[Sequence, int], float]
    density: Callable[[Sequence], Any]


@dataclass(frozen=True)
class AdvantageEstimate:
    value: float
    lower: float
    upper: float
    mode: str
    trials: int | None = None


def _with_record(base_dataset: Sequence, record) -> list:
    return list(base_dataset) + [record]


def _exact_advantage(setup: AttackSetup, mechanism: MechanismInstance, base_dataset: Sequence) -> float:
    cond = setup.conditional()
    dists = {x: mechanism.enumerate(_with_record(base_dataset, x)) for x in cond}
    outcomes = set().union(*dists.values())
    if len(cond) * len(outcomes) > MAX_JOINT_STATES:
        raise DomainError("too many joint states for exact enumeration")
    candidates = list(cond)
    total = 0.0
    for o in outcomes:
        if setup.adversary is None:
            best = max(
                sum(w * dists[x].get(o, 0.0) for x, w in cond.items() if setup.metric(c, x) <= setup.radius)
                for c in candidates
            )
        else:
            guess = setup.adversary(o)
            if not setup.in_domain(guess):
                raise AttackError(f"adversary returned {guess!r}, which is outside the record domain")
            best = sum(w * dists[x].get(o, 0.0) for x, w in cond.items() if setup.metric(guess, x) <= setup.radius)
        total += best
    return total


def _quadrature_advantage(setup: AttackSetup, mechanism: ContinuousMechanism, base_dataset: Sequence) -> float:
    cond = setup.conditional()
    dens = {x: mechanism.density(_with_record(base_dataset, x)) for x in cond}
    lo = min(float(d.ppf(1e-13)) for d in dens.values())
    hi = max(float(d.isf(1e-13)) for d in dens.values())
    grid = np.linspace(lo, hi, 200_001)
    pdfs = {x: d.pdf(grid) for x, d in dens.items()}
    if setup.adversary is None:
        gains = [
            sum(w * pdfs[x] for x, w in cond.items() if setup.metric(c, x) <= setup.radius)
            for c in cond
        ]
        integrand = np.max(np.vstack(gains), axis=0)
    else:
        guesses = [setup.adversary(float(t)) for t in grid]
        for g in set(guesses):
            if not setup.in_domain(g):
                raise AttackError(f"adversary returned {g!r}, which is outside the record domain")
        integrand = np.array([
            sum(w * pdfs[x][i] for x, w in cond.items() if setup.metric(g, x) <= setup.radius)
            for i, g in enumerate(guesses)
        ])
    return float(integrate.simpson(integrand, x=grid))


def attribute_inference_advantage(setup: AttackSetup, mechanism, base_dataset: Sequence,
                                  trials: int | None = None, seed: int = 0) -> AdvantageEstimate:
    """Probability the adversary lands within ``radius`` of the withheld record.

    Exact when the mechanism enumerates its outcomes, by quadrature when it
    exposes a scalar density, and otherwise by Monte Carlo over ``trials``
    games with a Wilson interval.
    """
    exact_ok = setup.finite and trials is None
    if exact_ok and isinstance(mechanism, MechanismInstance) and mechanism.enumerate is not None:
        v = _exact_advantage(setup, mechanism, base_dataset)
        return AdvantageEstimate(v, v, v, "exact")
    if exact_ok and isinstance(mechanism, ContinuousMechanism):
        v = _quadrature_advantage(setup, mechanism, base_dataset)
        return AdvantageEstimate(v, v - QUADRATURE_SLACK, v + QUADRATURE_SLACK, "quadrature")
    if setup.adversary is None:
        raise DomainError("Monte-Carlo mode needs a caller-supplied adversary")
    trials = trials or 10_000
    rng_prior, rng_seeds = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
    secrets = setup.sample_conditional(trials, rng_prior)
    run_seeds = rng_seeds.integers(0, 2**63 - 1, size=trials)
    hits = 0
    for x, s in zip(secrets, run_seeds):
        guess = setup.adversary(mechanism.run(_with_record(base_dataset, x), int(s)))
        if not setup.in_domain(guess):
            raise AttackError(f"adversary returned {guess!r}, which is outside the record domain")
        hits += setup.metric(guess, x) <= setup.radius
    lo, hi = wilson_interval(hits, trials)
    return AdvantageEstimate(hits / trials, lo, hi, "monte-carlo", trials)


@dataclass(frozen=True)
class AttributeBoundReport:
    passed: bool
    advantage: AdvantageEstimate
    ball: BallProfile
    bound: float
    slack: float
    note: str = "necessary, not sufficient: only the adversaries tried are covered"

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "passed": self.passed,
            "mode": self.advantage.mode,
            "advantage": self.advantage.value,
            "advantage_ci": [self.advantage.lower, self.advantage.upper],
            "ball": self.ball.value,
            "bound": self.bound,
            "slack": self.slack,
            "note": self.note,
        }


def check_attribute_bound(setup: AttackSetup, mechanism, curve: TradeoffCurve, base_dataset: Sequence,
                          trials: int | None = None, seed: int = 0) -> AttributeBoundReport:
    """Compare the measured advantage with ``1 - f(Ball)``; a violation is a failing report."""
    try:
        curve.validate()
    except DomainError as exc:
        raise DomainError(f"reference curve refused: {exc}") from None
    ball = estimate_ball(setup, seed=seed)
    adv = attribute_inference_advantage(setup, mechanism, base_dataset, trials, seed)
    ball_value = ball.value if ball.ci is None else ball.ci[0]
    bound = 1.0 - float(curve(ball_value))
    if adv.mode == "exact":
        slack, measured = EXACT_SLACK, adv.value
    elif adv.mode == "quadrature":
        slack, measured = QUADRATURE_SLACK, adv.value
    else:
        slack, measured = adv.upper - adv.value, adv.value
    return AttributeBoundReport(measured <= bound + slack, adv, ball, bound, slack)


# ---------------------------------------------------------------------------
# one-step noisy SGD on a scalar model, in closed form


def one_step_mixture(private_pool: Batch, public_pool: Batch, split: LossSplit, cfg: TrainConfig,
                     sampling_prob: float, init: float = 0.0) -> GaussianMixture:
    """Exact output law of one unprojected step with a scalar weight."""
    if tuple(split.weight_shape) != (1,):
        raise DomainError("one_step_mixture needs a scalar model")
    if cfg.steps != 1 or cfg.projection_radius is not None or cfg.sigma <= 0:
        raise DomainError("one_step_mixture needs steps = 1, no projection and sigma > 0")
    w0 = np.array([init])
    priv = _clip_rows(split.priv_grad(w0, private_pool), cfg.clip)[:, 0] / cfg.priv_batch_expected
    pub = split.pub_grad(w0, public_view(public_pool, split.schema)).reshape(len(public_pool))
    n = len(priv)
    if n > 16:
        raise DomainError("too many private records to enumerate batches")
    size = min(cfg.pub_batch, len(public_pool))
    pub_means = np.array([pub[list(c)].mean() for c in itertools.combinations(range(len(pub)), size)])
    weights, sums = [], []
    for mask in itertools.product((0, 1), repeat=n):
        k = sum(mask)
        weights.append(sampling_prob ** k * (1 - sampling_prob) ** (n - k))
        sums.append(float(np.dot(mask, priv)) if n else 0.0)
    eta = cfg.learning_rate(1)
    means = (init - eta * (pub_means[None, :] + cfg.mix_ratio * np.array(sums)[:, None])).ravel()
    comp_w = (np.array(weights)[:, None] * np.full(len(pub_means), 1.0 / len(pub_means))[None, :]).ravel()
    uniq, inverse = np.unique(np.round(means, 15), return_inverse=True)
    merged = np.bincount(inverse, weights=comp_w)
    return GaussianMixture(merged, uniq, eta * cfg.mix_ratio * cfg.sigma)


@dataclass(frozen=True)
class ScalarProblem:
    """Quadratic loss on one private coordinate with a constant public label."""

    strength: float = 1.0
    radius: float = 1.0
    cfg: TrainConfig = field(default_factory=lambda: TrainConfig(
        priv_batch_expected=1, pub_batch=1, steps=1, sigma=1.0, lr=1.0))

    @property
    def split(self) -> LossSplit:
        return quadratic_split(1, self.strength, private_columns=[0], data_radius=self.radius)

    def batch(self, values: Sequence[float]) -> Batch:
        return Batch(np.asarray(values, dtype=float).reshape(-1, 1), np.zeros(len(values), dtype=int))

    def public(self, value: float) -> PublicView:
        return public_view(self.batch([value]), self.split.schema)

    def mechanism_density(self, dataset: Sequence[float]) -> GaussianMixture:
        b = self.batch(dataset)
        return one_step_mixture(b, b, self.split, self.cfg, self.cfg.priv_batch_expected / len(b))

    def simulator_density(self, dataset_without_target: Sequence[float]) -> GaussianMixture:
        b = self.batch(dataset_without_target)
        pool = Batch(np.concatenate([b.features, filler_record(self.public(0.0), self.split).features]),
                     np.zeros(len(b) + 1, dtype=int))
        return one_step_mixture(b, pool, self.split, self.cfg, self.cfg.priv_batch_expected / (len(b) + 1))

    def mechanism(self) -> ContinuousMechanism:
        def run(dataset, seed):
            return float(sample_one_step(self.batch(dataset), self.split, self.cfg, 1, seed)[0, 0])
        return ContinuousMechanism("fdp-sgd-one-step", run, self.mechanism_density)

    def sensitivity(self) -> float:
        return (self.cfg.clip if self.cfg.clip is not None else self.split.priv_lipschitz) / self.cfg.priv_batch_expected

    def insertion_spec(self, n_with_target: int) -> MechanismSpec:
        return MechanismSpec(self.sensitivity(), self.cfg.sigma,
                             min(1.0, self.cfg.priv_batch_expected / n_with_target), 1)

    def replacement_curve(self) -> TradeoffCurve:
        """Valid curve when the withheld record is swapped for another with the same public part.

        Conditioned on the batch membership the two outputs are Gaussians whose
        means differ by at most twice the sensitivity; mixing with identical
        weights can only make testing harder.
        """
        return gaussian_tradeoff(2.0 * self.sensitivity() / self.cfg.sigma)


# ---------------------------------------------------------------------------
# distinguishing games


@dataclass(frozen=True)
class GameReport:
    empirical: EmpiricalTradeoff
    reference: TradeoffCurve | None
    lower_violation: float | None
    passed: bool | None
    n_samples: int

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "n_samples": self.n_samples,
            "level": self.empirical.level,
            "band_alpha": self.empirical.band_alpha,
            "band_beta": self.empirical.band_beta,
            "flags": list(self.empirical.flags),
            "lower_violation": self.lower_violation,
            "passed": self.passed,
            "empirical_curve": self.empirical.curve.to_json(),
        }


def _report(emp: EmpiricalTradeoff, reference: TradeoffCurve | None, n: int) -> GameReport:
    if reference is None:
        return GameReport(emp, None, None, None, n)
    viol = emp.lower_violation(reference)
    return GameReport(emp, reference, viol, viol <= 1e-12, n)


def distinguishing_game(mechanism: MechanismInstance, simulator: SimulatorInstance, withheld_record,
                        base_dataset: Sequence, n_samples: int, public_fn: Callable[[Any], Any],
                        score: Callable[[Any], float] | None = None, seed: int = 0, level: float = 0.99,
                        reference: TradeoffCurve | None = None) -> GameReport:
    """Empirical trade-off between sim(S, public(x)) (null) and M(S + x) (alternative).

    Without ``score`` both sides must enumerate their outcomes and the exact
    log-likelihood ratio is used.
    """
    full = _with_record(base_dataset, withheld_record)
    public = public_fn(withheld_record)
    if score is None:
        if mechanism.enumerate is None or simulator.enumerate is None:
            raise DomainError("no score given and the outcome distributions are not enumerable")
        dq = mechanism.enumerate(full)
        dp = simulator.enumerate(list(base_dataset), public)

        def score(o):
            q, p = dq.get(o, 0.0), dp.get(o, 0.0)
            if q == 0.0:
                return -math.inf
            return math.inf if p == 0.0 else math.log(q) - math.log(p)

    seeds = np.random.SeedSequence(seed).spawn(2)
    sp = np.random.default_rng(seeds[0]).integers(0, 2**63 - 1, size=n_samples)
    sq = np.random.default_rng(seeds[1]).integers(0, 2**63 - 1, size=n_samples)
    scores_p = np.array([score(simulator.run(list(base_dataset), public, int(s))) for s in sp])
    scores_q = np.array([score(mechanism.run(full, int(s))) for s in sq])
    return _report(_finite_scores(scores_p, scores_q, level), reference, n_samples)


def _finite_scores(scores_p: np.ndarray, scores_q: np.ndarray, level: float) -> EmpiricalTradeoff:
    # infinite log-ratios are ordered correctly by large finite stand-ins
    both = np.concatenate([scores_p, scores_q])
    finite = both[np.isfinite(both)]
    span = float(np.max(np.abs(finite))) + 1.0 if finite.size else 1.0
    clip = lambda s: np.clip(np.nan_to_num(s, posinf=span * 2, neginf=-span * 2), -span * 2, span * 2)
    return empirical_tradeoff(clip(scores_p), clip(scores_q), level)


def fdp_sgd_game(problem: ScalarProblem, dataset_without_target: Sequence[float], withheld: float,
                 n_samples: int = 1_000_000, seed: int = 0, level: float = 0.99) -> GameReport:
    """One step of the two-batch optimizer against its simulator, scored by the exact log-ratio.

    The reference is the one-step subsampled Gaussian curve with the
    simulator as the null hypothesis.
    """
    sim_density = problem.simulator_density(dataset_without_target)
    mech_density = problem.mechanism_density(list(dataset_without_target) + [withheld])
    base = problem.batch(dataset_without_target)
    full = problem.batch(list(dataset_without_target) + [withheld])
    s_sim, s_mech = np.random.SeedSequence(seed).spawn(2)
    seed_of = lambda s: int(s.generate_state(1)[0])
    out_sim = sample_one_step(base, problem.split, problem.cfg, n_samples, seed_of(s_sim),
                              public_value=problem.public(withheld))[:, 0]
    out_mech = sample_one_step(full, problem.split, problem.cfg, n_samples, seed_of(s_mech))[:, 0]
    llr = lambda w: mech_density.logpdf(w) - sim_density.logpdf(w)
    emp = _finite_scores(llr(out_sim), llr(out_mech), level)
    reference = subsampled_gaussian_tradeoff(problem.insertion_spec(len(full)))
    return _report(emp, reference, n_samples)


# ---------------------------------------------------------------------------
# subsampling does not amplify the randomized-response construction


@dataclass(frozen=True)
class NonAmplificationRow:
    sampling_prob: float
    tight_epsilon: float
    simulator_epsilon: float
    gaussian_epsilon: float


@dataclass(frozen=True)
class NonAmplificationTable:
    epsilon: float
    dims: int
    delta: float
    gaussian_sigma: float
    rows: tuple[NonAmplificationRow, ...]

    @property
    def non_decreasing(self) -> bool:
        """Tight epsilon never drops as the sampling rate drops."""
        ordered = sorted(self.rows, key=lambda r: -r.sampling_prob)
        return all(b.tight_epsilon >= a.tight_epsilon - 1e-9 for a, b in zip(ordered, ordered[1:]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["p", "tight_epsilon", "simulator_epsilon", "gaussian_epsilon"])
        for r in self.rows:
            writer.writerow([repr(r.sampling_prob), repr(r.tight_epsilon), repr(r.simulator_epsilon),
                             repr(r.gaussian_epsilon)])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "epsilon": self.epsilon,
            "dims": self.dims,
            "gaussian_delta": self.delta,
            "gaussian_sigma": self.gaussian_sigma,
            "non_decreasing": self.non_decreasing,
            "rows": [r.__dict__ for r in self.rows],
        }


def worst_case_records(dims: int) -> tuple[BitRecord, BitRecord, BitRecord]:
    """All-zero record, all-one record, and the all-one record with its first bit cleared."""
    if dims < 2:
        raise DomainError("the construction needs at least two bits")
    return (BitRecord((0,) * dims), BitRecord((1,) * dims), BitRecord((0,) + (1,) * (dims - 1)))


def nonamplification_demo(epsilon: float, probs: Sequence[float], dims: int = 2,
                          keep_variant: str = "displayed", delta: float = 1e-5) -> NonAmplificationTable:
    """Exact privacy of the subsampled randomized-response construction.

    ``tight_epsilon`` is half the largest log-ratio between the outputs on
    {a, b} and on {a, c}, where b and c share their public bits.  Any
    simulator must sit within its epsilon of both, so no simulator does
    better.  ``simulator_epsilon`` is the best of the shipped zero-fill
    simulators.  The Gaussian column uses the noise that yields ``epsilon``
    at ``delta`` without subsampling.
    """
    if not epsilon > 0:
        raise DomainError("epsilon must be > 0")
    a, b, c = worst_case_records(dims)
    sigma = float(calibrate_sigma(PrivacyParams(epsilon, delta), 1.0, 1))
    rows = []
    for p in probs:
        if not 0.0 < p <= 1.0:
            raise DomainError("sampling probabilities must lie in (0, 1]")
        with_b = rr_outcome_distribution([a, b], epsilon, p, keep_variant)
        with_c = rr_outcome_distribution([a, c], epsilon, p, keep_variant)
        tight = 0.5 * max_log_ratio(with_b, with_c)
        sim_eps = math.inf
        for variant in ("displayed", "proof"):
            sim = rr_simulator_distribution([a], b.public, epsilon, p, variant, keep_variant)
            sim_eps = min(sim_eps, max(max_log_ratio(with_b, sim), max_log_ratio(with_c, sim)))
        gauss = epsilon_for(MechanismSpec(1.0, sigma, p, 1), delta)
        rows.append(NonAmplificationRow(float(p), tight, sim_eps, gauss))
    return NonAmplificationTable(epsilon, dims, delta, sigma, tuple(rows))


# ---------------------------------------------------------------------------
# the shipped exact-mode attribute suite


def _hamming(x: BitRecord, y: BitRecord) -> int:
    return sum(a != b for a, b in zip(x.bits, y.bits))


def constant_mechanism() -> MechanismInstance:
    return MechanismInstance("constant", lambda data, seed: 0, "a single outcome", lambda data: {0: 1.0})


def rr_exact_curve(epsilon: float, base_dataset: Sequence[BitRecord], public_bits: tuple[int, ...],
                   keep_variant: str = "displayed") -> TradeoffCurve:
    """Exact curve between releases that differ only in the withheld record's first bit."""
    zero = rr_outcome_distribution(list(base_dataset) + [BitRecord((0,) + public_bits)], epsilon, 1.0, keep_variant)
    one = rr_outcome_distribution(list(base_dataset) + [BitRecord((1,) + public_bits)], epsilon, 1.0, keep_variant)
    return symmetrize(tradeoff_from_pair(outcome_pair(zero, one)))


def attribute_suite(understate: float = 1.0) -> list[tuple[str, AttributeBoundReport]]:
    """Every shipped exact-mode instance; ``understate > 1`` shrinks each curve's privacy loss.

    The randomized-response cells sweep four priors on the first bit and four
    radii.  With ``understate = 2`` the curves claim half the true privacy
    loss, and at least one cell must fail.
    """
    out = []
    eps = math.log(2.0)
    mech, _ = get_mechanism("rr", epsilon=eps)
    base = [BitRecord((0, 0))]
    public = (1,)
    flip = mech.enumerate([BitRecord((1, 1))])[((1, 1),)]
    true_eps = math.log(flip / (1.0 - flip))
    curve = rr_exact_curve(eps, base, public) if understate == 1.0 else linear_curve(true_eps / understate, 0.0)
    for q in (0.5, 0.7, 0.9, 0.99):
        prior = {BitRecord((1,) + public): q, BitRecord((0,) + public): 1.0 - q}
        for radius in (0.0, 0.5, 1.0, 2.0):
            setup = AttackSetup(prior, public, lambda r: r.public, _hamming, radius)
            out.append((f"rr prior={q} radius={radius}", check_attribute_bound(setup, mech, curve, base)))
    for q in (0.5, 0.9):
        prior = {BitRecord((1,) + public): q, BitRecord((0,) + public): 1.0 - q}
        setup = AttackSetup(prior, public, lambda r: r.public, _hamming, 0.0)
        out.append((f"constant prior={q}", check_attribute_bound(setup, constant_mechanism(), identity_curve(), base)))
    problem = ScalarProblem(cfg=TrainConfig(priv_batch_expected=1, pub_batch=2, steps=1, sigma=1.0, lr=1.0))
    mu = 2.0 * problem.sensitivity() / problem.cfg.sigma
    for q in (0.5, 0.8):
        setup = AttackSetup({-1.0: q, 1.0: 1.0 - q}, (), lambda z: (), lambda a, b: abs(a - b), 0.0)
        curve = gaussian_tradeoff(mu / understate)
        out.append((f"fdp-sgd one-step prior={q}",
                    check_attribute_bound(setup, problem.mechanism(), curve, [0.5])))
    return out
