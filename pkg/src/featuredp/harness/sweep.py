"""Privacy-utility sweeps: calibrate, tune, repeat, report.

Every run's seed is a hash of the master seed and the run's canonical
identity (method name, target epsilon, purpose, repeat), so adding a method
or a grid point never changes the seeds of other runs.
"""

from __future__ import annotations

import dataclasses
import functools
import hashlib
import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from featuredp.errors import CalibrationError, DomainError
from featuredp.harness.data import FeatureDataset, design_matrix
from featuredp.sgd.losses import (
    Batch,
    LossSplit,
    logistic_split,
    masking_split,
    padding_split,
    quadratic_split,
    softmax_cross_entropy,
)
from featuredp.sgd.train import (
    TrainConfig,
    TrainReport,
    public_only_baseline,
    public_pretrain,
    train_dpsgd_baseline,
    train_fdp_sgd,
)
from featuredp.tradeoff.accountant import calibrate_sigma, epsilon_for
from featuredp.tradeoff.curve import SCHEMA_VERSION, PrivacyParams

METHODS = ("fdp-sgd", "dpsgd", "public-only", "pretrain+fdp")
SPLITS = ("auto", "logistic", "padding", "masking", "quadratic")
DEFAULT_GRID = {"clip": [0.1, 1.0, 5.0, 10.0]}


def run_seed(master: int, *parts) -> int:
    """Deterministic 63-bit seed from the master seed and a run identity."""
    key = "|".join(str(p) for p in (master,) + parts).encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big") >> 1


@dataclass(frozen=True)
class SweepSpec:
    epsilon_grid: tuple[float, ...]
    methods: tuple[str, ...]
    base_config: dict
    delta: float | None = None
    repeats: int = 1
    grids: dict = field(default_factory=dict)
    split: str = "auto"
    held_out: float = 0.2
    pretrain_epochs: int = 5
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "epsilon_grid", tuple(float(e) for e in self.epsilon_grid))
        object.__setattr__(self, "methods", tuple(self.methods))
        if not self.epsilon_grid:
            raise DomainError("epsilon_grid must not be empty")
        if any(not e > 0 for e in self.epsilon_grid):
            raise DomainError("target epsilons must be > 0")
        unknown = set(self.methods) - set(METHODS)
        if unknown or not self.methods:
            raise DomainError(f"methods must be a non-empty subset of {METHODS}")
        if self.repeats < 1:
            raise DomainError("repeats must be >= 1")
        for method, grid in self.grids.items():
            if method not in METHODS:
                raise DomainError(f"grid given for unknown method {method!r}")
            if not grid or any(not values for values in grid.values()):
                raise DomainError(f"hyperparameter grid for {method!r} has an empty axis")
        if self.split not in SPLITS:
            raise DomainError(f"split must be one of {SPLITS}")
        if not 0.0 < self.held_out < 1.0:
            raise DomainError("held_out must lie in (0, 1)")
        if self.delta is not None and not 0.0 < self.delta < 1.0:
            raise DomainError("delta must lie in (0, 1)")

    def grid_for(self, method: str) -> dict:
        return self.grids.get(method, DEFAULT_GRID if method != "public-only" else {})

    def to_json(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, **{
            k: (list(v) if isinstance(v, tuple) else v) for k, v in dataclasses.asdict(self).items()}}

    @classmethod
    def from_json(cls, doc: dict) -> "SweepSpec":
        doc = {k: v for k, v in doc.items() if k != "schema_version"}
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - names
        if unknown:
            raise DomainError(f"unknown sweep fields: {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def load(cls, path) -> "SweepSpec":
        return cls.from_json(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# splits and data preparation


def build_split(ds: FeatureDataset, kind: str = "auto") -> tuple[LossSplit, Batch]:
    batch, schema = design_matrix(ds)
    if kind == "auto":
        kind = {"purchase-like": "masking", "criteo-like": "masking", "label-dp-gaussian": "logistic",
                "strongly-convex-quadratic": "quadratic"}.get(ds.ground_truth.get("kind"), "masking")
    d = batch.features.shape[1]
    k = max(ds.num_classes, 2)
    if kind == "logistic":
        if schema.label_public or not schema.public_columns.all():
            raise DomainError("the logistic label split needs public features and a private label")
        return logistic_split(d, k), batch
    if kind == "quadratic":
        private = np.flatnonzero(~schema.public_columns)
        strength = float(ds.ground_truth.get("strength", 1.0))
        radius = float(ds.ground_truth.get("radius", ds.manifest.norm_bound or 1.0))
        return quadratic_split(d, strength, private, data_radius=radius), batch
    if not schema.label_public:
        raise DomainError(f"the {kind} split evaluates the label in the public loss, so it must be public")
    base = softmax_cross_entropy(k)
    if kind == "padding":
        return padding_split(np.flatnonzero(schema.public_columns), d, base), batch
    return masking_split(np.flatnonzero(~schema.public_columns), d, base), batch


def holdout(batch: Batch, fraction: float, seed: int) -> tuple[Batch, Batch, Batch]:
    """Train, validation and test parts; validation picks hyperparameters, test is reported."""
    n = len(batch)
    order = np.random.default_rng(seed).permutation(n)
    cut = n - int(round(fraction * n))
    mid = cut + (n - cut) // 2
    return batch.take(order[:cut]), batch.take(order[cut:mid]), batch.take(order[mid:])


def utility(split: LossSplit, w: np.ndarray, data: Batch) -> float:
    """Accuracy for classifiers, negative mean loss otherwise."""
    if split.predict is not None:
        return float(np.mean(split.predict(w, data.features) == data.labels))
    return -float(np.mean(split.loss(w, data)))


@functools.lru_cache(maxsize=256)
def _multiplier(epsilon: float, delta: float, sampling_prob: float, steps: int) -> float:
    return float(calibrate_sigma(PrivacyParams(epsilon, delta), sampling_prob, steps))


# ---------------------------------------------------------------------------
# one run


def calibrated_config(method: str, cfg: TrainConfig, split: LossSplit, n: int, epsilon: float,
                      delta: float) -> TrainConfig:
    """Attach the noise that meets ``(epsilon, delta)`` for this method and config."""
    if method == "public-only":
        return cfg.replace(delta=delta)
    clip = cfg.clip
    if clip is None:
        clip = split.full_lipschitz if method == "dpsgd" else split.priv_lipschitz
        if clip is None:
            raise DomainError(f"{method} needs a clip value for this split")
    mult = _multiplier(epsilon, delta, min(1.0, cfg.priv_batch_expected / n), cfg.steps)
    return cfg.replace(sigma=mult * clip / cfg.priv_batch_expected, clip=clip, delta=delta)


def run_method(method: str, train: Batch, split: LossSplit, cfg: TrainConfig,
               pretrain_epochs: int = 5) -> TrainReport:
    if method == "fdp-sgd":
        return train_fdp_sgd(train, split, cfg)
    if method == "dpsgd":
        return train_dpsgd_baseline(train, split, cfg)
    if method == "public-only":
        return public_only_baseline(train, split, cfg)
    if method == "pretrain+fdp":
        state = public_pretrain(train, split, pretrain_epochs, cfg.lr, cfg.pub_batch, cfg.seed)
        return train_fdp_sgd(train, split, cfg, init=state)
    raise DomainError(f"unknown method {method!r}")


def _grid_points(grid: dict) -> list[dict]:
    keys = sorted(grid)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


def _cell(spec: SweepSpec, method: str, epsilon: float, delta: float, split: LossSplit,
          train: Batch, valid: Batch, test: Batch) -> dict:
    row: dict[str, Any] = {"schema_version": SCHEMA_VERSION, "epsilon_target": epsilon, "delta": delta,
                           "method": method, "n_train": len(train)}
    base = TrainConfig.from_json({**spec.base_config, "sigma": spec.base_config.get("sigma", 0.0)})
    points = _grid_points(spec.grid_for(method)) or [{}]
    try:
        best, best_score = None, -math.inf
        for i, point in enumerate(points):
            seed = run_seed(spec.seed, method, epsilon, "tune", json.dumps(point, sort_keys=True))
            cfg = calibrated_config(method, base.replace(**point, seed=seed), split, len(train), epsilon, delta)
            report = run_method(method, train, split, cfg, spec.pretrain_epochs)
            score = utility(split, report.final_weights, valid)
            if score > best_score:
                best, best_score = point, score
        scores, reports = [], []
        for r in range(spec.repeats):
            seed = run_seed(spec.seed, method, epsilon, "repeat", r)
            cfg = calibrated_config(method, base.replace(**best, seed=seed), split, len(train), epsilon, delta)
            report = run_method(method, train, split, cfg, spec.pretrain_epochs)
            reports.append(report)
            scores.append(utility(split, report.final_weights, test))
    except CalibrationError as exc:
        row.update(status="calibration-failed", error=str(exc))
        return row
    last = reports[-1]
    mech = last.spec
    accounted = 0.0 if method == "public-only" else (
        math.inf if mech is None else epsilon_for(mech, delta))
    row.update(
        status="ok",
        utility_mean=float(np.mean(scores)),
        utility_std=float(np.std(scores, ddof=1)) if len(scores) > 1 else 0.0,
        utility_runs=scores,
        accounted_epsilon=accounted,
        hyperparameters=best,
        config={k: v for k, v in last.config.to_json().items() if k not in ("seed", "schema_version")},
        mechanism=None if mech is None else dataclasses.asdict(mech),
    )
    return row


@dataclass(frozen=True)
class SweepResults:
    rows: tuple[dict, ...]

    def to_json(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "rows": [_jsonable(r) for r in self.rows]}

    @classmethod
    def from_json(cls, doc: dict) -> "SweepResults":
        return cls(tuple(_unjson(r) for r in doc["rows"]))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "SweepResults":
        return cls.from_json(json.loads(Path(path).read_text()))


def _jsonable(row: dict) -> dict:
    return {k: ("inf" if isinstance(v, float) and math.isinf(v) else v) for k, v in row.items()}


def _unjson(row: dict) -> dict:
    return {k: (math.inf if v == "inf" and k == "accounted_epsilon" else v) for k, v in row.items()}


def run_sweep(ds: FeatureDataset, spec: SweepSpec, workers: int = 1) -> SweepResults:
    """Every (epsilon, method) cell, tuned on validation data and scored on test data."""
    split, batch = build_split(ds, spec.split)
    train, valid, test = holdout(batch, spec.held_out, run_seed(spec.seed, "holdout"))
    delta = spec.delta if spec.delta is not None else 1.0 / (2 * len(train))
    cells = [(eps, method) for eps in spec.epsilon_grid for method in spec.methods]
    job = lambda cell: _cell(spec, cell[1], cell[0], delta, split, train, valid, test)
    if workers <= 1:
        rows = [job(c) for c in cells]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(job, cells))
    return SweepResults(tuple(rows))
