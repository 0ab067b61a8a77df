"""Randomized mechanisms, their simulators and public feature maps.

Every mechanism and simulator is a deterministic function of its inputs and
an integer seed.  A seed is expanded with ``numpy.random.SeedSequence`` into
independent child streams, one per source of randomness (subsampling,
flips, noise), so changing how one stream is consumed never shifts another.

The randomized-response counterexample works on records of ``d`` bits whose
public feature is every bit but the first.  It ships in two flavours that
differ only in the probability of keeping the first bit:

* ``"displayed"`` keeps it with probability ``e^{2 eps} / (1 + e^{2 eps})``;
* ``"v2"`` keeps it with probability ``1 - 1 / (2 e^eps)``.

Its simulator emits the withheld record's public bits with a fresh first bit
(or nothing).  ``"displayed"`` emits nothing with probability
``1 - p e^eps / (1 + e^{2 eps})`` and splits the rest evenly over the two
first-bit values; ``"proof"`` emits nothing with probability ``1 - p`` and
each first-bit value with probability ``p / 2``.
"""

from __future__ import annotations

import itertools
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy import special

from featuredp.errors import DomainError, SchemaError
from featuredp.tradeoff.curve import SCHEMA_VERSION
from featuredp.tradeoff.pairs import DominatingPair

Outcome = tuple[tuple[int, ...], ...]

KEEP_VARIANTS = ("displayed", "v2")
SIMULATOR_VARIANTS = ("displayed", "proof")


# ---------------------------------------------------------------------------
# records and feature maps


@dataclass(frozen=True, order=True)
class BitRecord:
    bits: tuple[int, ...]

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if len(bits) < 1:
            raise DomainError("a bit record needs at least one bit")
        if any(b not in (0, 1) for b in bits):
            raise DomainError(f"bits must be 0 or 1, got {self.bits}")
        object.__setattr__(self, "bits", bits)

    @property
    def d(self) -> int:
        return len(self.bits)

    @property
    def public(self) -> tuple[int, ...]:
        """Every bit but the first."""
        return self.bits[1:]

    def with_first(self, bit: int) -> "BitRecord":
        return BitRecord((bit,) + self.bits[1:])


@dataclass(frozen=True)
class FeatureMap:
    """Deterministic map from a record to the part of it that may leak.

    Records are mappings from field name to value, or sequences indexed by
    position.  ``private_fields`` names the withheld fields.
    """

    name: str
    private_fields: tuple = ()
    descriptor: str = ""

    @classmethod
    def label_dp(cls, label: str = "label") -> "FeatureMap":
        return cls("label-dp", (label,), f"every field except {label!r}")

    @classmethod
    def columns(cls, private: Iterable) -> "FeatureMap":
        private = tuple(private)
        return cls("columns", private, f"every field except {list(private)}")

    @classmethod
    def identity(cls) -> "FeatureMap":
        return cls("identity", (), "the whole record")

    def apply(self, record) -> dict:
        return split_record(record, self)[0]


def _as_fields(record) -> dict:
    if isinstance(record, Mapping):
        return dict(record)
    return dict(enumerate(record))


def split_record(record, feature_map: FeatureMap, columns: Sequence | None = None) -> tuple[dict, dict]:
    """Split a record into its public and private parts.

    When ``columns`` is given the record must carry exactly those fields.
    """
    fields = _as_fields(record)
    if columns is not None:
        expected = list(columns)
        for col in expected:
            if col not in fields:
                raise SchemaError(f"record is missing column {col!r}")
        for col in fields:
            if col not in expected:
                raise SchemaError(f"record has unexpected column {col!r}")
    for col in feature_map.private_fields:
        if col not in fields:
            raise SchemaError(f"private column {col!r} is absent from the record")
    private = {k: v for k, v in fields.items() if k in feature_map.private_fields}
    public = {k: v for k, v in fields.items() if k not in feature_map.private_fields}
    return public, private


def recombine(public: Mapping, private: Mapping, order: Sequence | None = None):
    """Inverse of ``split_record``; positional records come back as lists."""
    merged = {**public, **private}
    if order is not None:
        return {k: merged[k] for k in order}
    if all(isinstance(k, int) for k in merged):
        return [merged[k] for k in sorted(merged)]
    return merged


# ---------------------------------------------------------------------------
# primitives


def _streams(seed: int, count: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


def poisson_subsample(dataset: Sequence, prob: float, seed: int) -> list:
    """Keep each record independently with probability ``prob``; order is preserved."""
    if not 0.0 <= prob <= 1.0:
        raise DomainError(f"prob must lie in [0, 1], got {prob}")
    (rng,) = _streams(seed, 1)
    mask = rng.random(len(dataset)) < prob
    return [rec for rec, keep in zip(dataset, mask) if keep]


def gaussian_sum(vectors: Sequence, sigma: float, seed: int, dim: int | None = None) -> np.ndarray:
    """Coordinate-wise sum plus independent N(0, sigma^2) noise per coordinate."""
    if sigma < 0:
        raise DomainError(f"sigma must be >= 0, got {sigma}")
    arrays = [np.asarray(v, dtype=float).ravel() for v in vectors]
    if arrays:
        dims = {len(a) for a in arrays}
        if len(dims) != 1 or (dim is not None and dims != {dim}):
            raise DomainError(f"vectors disagree in dimension: {sorted(dims)}")
        dim = arrays[0].size
        total = np.sum(arrays, axis=0)
    elif dim is None:
        raise DomainError("dim is required when there are no vectors")
    else:
        total = np.zeros(dim)
    (rng,) = _streams(seed, 1)
    return total + sigma * rng.standard_normal(dim)


# ---------------------------------------------------------------------------
# randomized-response counterexample


def flip_probability(epsilon: float, variant: str = "displayed") -> float:
    """Probability that the first bit is flipped."""
    if not epsilon > 0:
        raise DomainError(f"epsilon must be > 0, got {epsilon}")
    if variant == "displayed":
        return float(special.expit(-2.0 * epsilon))
    if variant == "v2":
        return 0.5 * math.exp(-epsilon)
    raise DomainError(f"unknown keep variant {variant!r}; expected one of {KEEP_VARIANTS}")


def keep_probability(epsilon: float, variant: str = "displayed") -> float:
    return 1.0 - flip_probability(epsilon, variant)


def simulator_emit_probabilities(epsilon: float, subsample_prob: float,
                                 variant: str = "displayed") -> tuple[float, float, float]:
    """Probabilities that the simulator emits nothing, first bit 0, first bit 1."""
    if not 0.0 <= subsample_prob <= 1.0:
        raise DomainError(f"subsample_prob must lie in [0, 1], got {subsample_prob}")
    if variant == "displayed":
        emit = subsample_prob * math.exp(epsilon - math.log1p(math.exp(2.0 * epsilon))) if epsilon < 300 else 0.0
    elif variant == "proof":
        emit = subsample_prob
    else:
        raise DomainError(f"unknown simulator variant {variant!r}; expected one of {SIMULATOR_VARIANTS}")
    return 1.0 - emit, emit / 2.0, emit / 2.0


def _canonical(records: Iterable[BitRecord]) -> Outcome:
    return tuple(sorted(r.bits for r in records))


def _flip(records: Sequence[BitRecord], flip: float, rng: np.random.Generator) -> list[BitRecord]:
    flips = rng.random(len(records)) < flip
    return [r.with_first(1 - r.bits[0]) if f else r for r, f in zip(records, flips)]


def rr_counterexample(records: Sequence[BitRecord], epsilon: float, seed: int,
                      variant: str = "displayed") -> list[BitRecord]:
    """Flip the first bit of each record independently; keep the rest verbatim."""
    flip = flip_probability(epsilon, variant)
    (rng,) = _streams(seed, 1)
    return _flip(list(records), flip, rng)


def rr_counterexample_v2(records: Sequence[BitRecord], epsilon: float, seed: int) -> list[BitRecord]:
    return rr_counterexample(records, epsilon, seed, variant="v2")


def rr_mechanism(records: Sequence[BitRecord], epsilon: float, subsample_prob: float, seed: int,
                 variant: str = "displayed") -> Outcome:
    """Poisson subsampling followed by the counterexample, as a canonical outcome."""
    flip = flip_probability(epsilon, variant)
    rng_sub, rng_flip = _streams(seed, 2)
    records = list(records)
    chosen = [r for r, m in zip(records, rng_sub.random(len(records)) < subsample_prob) if m]
    return _canonical(_flip(chosen, flip, rng_flip))


def rr_simulator(records_without_target: Sequence[BitRecord], public_bits: Sequence[int],
                 subsample_prob: float, seed: int, epsilon: float = math.log(2.0),
                 variant: str = "displayed", keep_variant: str = "displayed") -> Outcome:
    """Run the mechanism on the known records and add a synthetic withheld record.

    Only the public bits of the withheld record are accepted.
    """
    rng_mech, rng_sim = np.random.SeedSequence(seed).spawn(2)
    known = rr_mechanism(records_without_target, epsilon, subsample_prob,
                         int(rng_mech.generate_state(1)[0]), keep_variant)
    nothing, zero, _ = simulator_emit_probabilities(epsilon, subsample_prob, variant)
    u = np.random.default_rng(rng_sim).random()
    public_bits = tuple(int(b) for b in public_bits)
    if u < nothing:
        return known
    bit = 0 if u < nothing + zero else 1
    return tuple(sorted(known + ((bit,) + public_bits,)))


# exact outcome distributions ------------------------------------------------


def _record_options(record: BitRecord, flip: float, prob: float) -> list[tuple[tuple | None, float]]:
    flipped = record.with_first(1 - record.bits[0]).bits
    opts = [(None, 1.0 - prob), (record.bits, prob * (1.0 - flip)), (flipped, prob * flip)]
    return [(o, w) for o, w in opts if w > 0]


def _combine(option_lists: list[list[tuple[tuple | None, float]]]) -> dict[Outcome, float]:
    dist: dict[Outcome, float] = defaultdict(float)
    for combo in itertools.product(*option_lists):
        w = 1.0
        parts = []
        for outcome, weight in combo:
            w *= weight
            if outcome is not None:
                parts.append(outcome)
        dist[tuple(sorted(parts))] += w
    return dict(dist)


def rr_outcome_distribution(records: Sequence[BitRecord], epsilon: float, subsample_prob: float,
                            variant: str = "displayed") -> dict[Outcome, float]:
    """Exact distribution of ``rr_mechanism`` by enumeration (3^n outcomes)."""
    flip = flip_probability(epsilon, variant)
    return _combine([_record_options(r, flip, subsample_prob) for r in records])


def rr_simulator_distribution(records_without_target: Sequence[BitRecord], public_bits: Sequence[int],
                              epsilon: float, subsample_prob: float, variant: str = "displayed",
                              keep_variant: str = "displayed") -> dict[Outcome, float]:
    """Exact distribution of ``rr_simulator`` by enumeration."""
    flip = flip_probability(epsilon, keep_variant)
    public_bits = tuple(int(b) for b in public_bits)
    nothing, zero, one = simulator_emit_probabilities(epsilon, subsample_prob, variant)
    extra = [(None, nothing), ((0,) + public_bits, zero), ((1,) + public_bits, one)]
    extra = [(o, w) for o, w in extra if w > 0]
    return _combine([_record_options(r, flip, subsample_prob) for r in records_without_target] + [extra])


def max_log_ratio(dist_a: Mapping, dist_b: Mapping) -> float:
    """Largest |log(a(o) / b(o))| over outcomes; infinite if the supports differ."""
    worst = 0.0
    for o in set(dist_a) | set(dist_b):
        a, b = dist_a.get(o, 0.0), dist_b.get(o, 0.0)
        if a == 0.0 and b == 0.0:
            continue
        if a == 0.0 or b == 0.0:
            return math.inf
        worst = max(worst, abs(math.log(a) - math.log(b)))
    return worst


def outcome_pair(dist_p: Mapping, dist_q: Mapping) -> DominatingPair:
    """Discrete pair over the union of two outcome distributions."""
    outcomes = sorted(set(dist_p) | set(dist_q))
    pp = np.array([dist_p.get(o, 0.0) for o in outcomes])
    pq = np.array([dist_q.get(o, 0.0) for o in outcomes])
    return DominatingPair.from_pmfs(pp / pp.sum(), pq / pq.sum())


# ---------------------------------------------------------------------------
# uniform abstraction and registry


@dataclass(frozen=True)
class MechanismInstance:
    name: str
    run: Callable[[Sequence, int], Any]
    outcome_space: str
    enumerate: Callable[[Sequence], dict] | None = None
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SimulatorInstance:
    """Simulator that only ever receives the public feature of the withheld record."""

    name: str
    run: Callable[[Sequence, Any, int], Any]
    enumerate: Callable[[Sequence, Any], dict] | None = None
    params: dict = field(default_factory=dict)


def _rr_factory(keep_variant: str):
    def build(epsilon: float = math.log(2.0), subsample_prob: float = 1.0,
              simulator_variant: str = "displayed") -> tuple[MechanismInstance, SimulatorInstance]:
        params = {"epsilon": epsilon, "subsample_prob": subsample_prob}
        mech = MechanismInstance(
            f"rr-{keep_variant}",
            lambda data, seed: rr_mechanism(data, epsilon, subsample_prob, seed, keep_variant),
            "discrete",
            lambda data: rr_outcome_distribution(data, epsilon, subsample_prob, keep_variant),
            params,
        )
        sim = SimulatorInstance(
            f"rr-{keep_variant}-sim-{simulator_variant}",
            lambda data, public, seed: rr_simulator(data, public, subsample_prob, seed, epsilon,
                                                    simulator_variant, keep_variant),
            lambda data, public: rr_simulator_distribution(data, public, epsilon, subsample_prob,
                                                           simulator_variant, keep_variant),
            {**params, "simulator_variant": simulator_variant},
        )
        return mech, sim
    return build


def _gaussian_sum_factory(sigma: float = 1.0, dim: int | None = None):
    mech = MechanismInstance(
        "gaussian-sum",
        lambda data, seed: gaussian_sum(data, sigma, seed, dim),
        f"real vectors of dimension {dim or 'matching the inputs'}",
        params={"sigma": sigma},
    )
    # the simulator replaces the withheld record by its public part, zero elsewhere
    sim = SimulatorInstance(
        "gaussian-sum-sim",
        lambda data, public, seed: gaussian_sum(list(data) + [public], sigma, seed, dim),
        params={"sigma": sigma},
    )
    return mech, sim


MECHANISMS: dict[str, Callable[..., tuple[MechanismInstance, SimulatorInstance]]] = {
    "rr": _rr_factory("displayed"),
    "rr-v2": _rr_factory("v2"),
    "gaussian-sum": _gaussian_sum_factory,
}


def get_mechanism(name: str, **params) -> tuple[MechanismInstance, SimulatorInstance]:
    try:
        factory = MECHANISMS[name]
    except KeyError:
        raise DomainError(f"unknown mechanism {name!r}; known: {sorted(MECHANISMS)}") from None
    return factory(**params)


def _jsonable(outcome):
    if isinstance(outcome, np.ndarray):
        return outcome.tolist()
    if isinstance(outcome, tuple):
        return [_jsonable(o) for o in outcome]
    return outcome


def dump_outcomes(path, mechanism: MechanismInstance, dataset: Sequence, seeds: Iterable[int]) -> int:
    """Write one JSON line per seed; returns the number of lines written."""
    count = 0
    with Path(path).open("w") as fh:
        for seed in seeds:
            outcome = mechanism.run(dataset, int(seed))
            fh.write(json.dumps({
                "schema_version": SCHEMA_VERSION,
                "mechanism": mechanism.name,
                "params": mechanism.params,
                "seed": int(seed),
                "outcome": _jsonable(outcome),
            }) + "\n")
            count += 1
    return count
