"""Noisy SGD with public features, its simulator, and a DP-SGD baseline.

Noise convention: ``TrainConfig.sigma`` is the standard deviation, per
coordinate, of the Gaussian noise added to the *normalized* private average
``(1/m) sum clip(priv_grad)``.  One example moves that average by at most
``C_eff / m``, so the run is accounted as the subsampled Gaussian mechanism
with sensitivity ``C_eff / m``, noise ``sigma`` and sampling rate ``m / n``.
With ``C_eff = 0`` the private channel carries nothing and no noise is added.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from featuredp.errors import DomainError, NonFiniteGradientError, SimulatorError
from featuredp.sgd.losses import Batch, LossSplit, PublicView, clipped_factor_sum, public_view
from featuredp.tradeoff.accountant import MechanismSpec, accounted_curve, epsilon_for
from featuredp.tradeoff.curve import INFINITE_EPSILON, SCHEMA_VERSION, PrivacyParams, TradeoffCurve

LR_SCHEDULES = ("constant", "inverse-sqrt", "inverse-t")
AGGREGATES = ("last", "uniform-average", "suffix-average")
ZERO_PRIVACY_COST = "zero-privacy-cost"


@dataclass(frozen=True)
class TrainConfig:
    priv_batch_expected: int
    pub_batch: int
    steps: int
    sigma: float
    lr: float = 0.1
    lr_schedule: str = "constant"
    strong_convexity: float | None = None
    clip: float | None = None
    mix_ratio: float = 1.0
    projection_radius: float | None = None
    aggregate: str = "last"
    momentum: float = 0.0
    delta: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.priv_batch_expected < 1 or self.pub_batch < 1:
            raise DomainError("batch sizes must be >= 1")
        if self.steps < 1:
            raise DomainError("steps must be >= 1")
        if self.sigma < 0:
            raise DomainError("sigma must be >= 0")
        if self.lr_schedule not in LR_SCHEDULES:
            raise DomainError(f"lr_schedule must be one of {LR_SCHEDULES}")
        if self.lr_schedule == "inverse-t" and not (self.strong_convexity or 0) > 0:
            raise DomainError("inverse-t schedule needs strong_convexity > 0")
        if self.clip is not None and self.clip < 0:
            raise DomainError("clip must be >= 0")
        if not self.mix_ratio > 0:
            raise DomainError("mix_ratio must be > 0")
        if self.projection_radius is not None and not self.projection_radius > 0:
            raise DomainError("projection_radius must be > 0")
        if self.aggregate not in AGGREGATES:
            raise DomainError(f"aggregate must be one of {AGGREGATES}")
        if not 0.0 <= self.momentum < 1.0:
            raise DomainError("momentum must lie in [0, 1)")
        if self.delta is not None and not 0.0 < self.delta < 1.0:
            raise DomainError("delta must lie in (0, 1)")

    def learning_rate(self, step: int) -> float:
        """Step size at 1-based ``step``."""
        if self.lr_schedule == "constant":
            return self.lr
        if self.lr_schedule == "inverse-sqrt":
            return self.lr / math.sqrt(step)
        return 1.0 / (self.strong_convexity * step)

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)

    def to_json(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, **dataclasses.asdict(self)}

    @classmethod
    def from_json(cls, doc: dict) -> "TrainConfig":
        doc = {k: v for k, v in doc.items() if k != "schema_version"}
        unknown = set(doc) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise DomainError(f"unknown config fields: {sorted(unknown)}")
        return cls(**doc)


@dataclass
class ModelState:
    weights: np.ndarray
    step_index: int = 0
    iterate_history: list | None = None
    flags: tuple[str, ...] = ()


@dataclass(frozen=True)
class TrainReport:
    method: str
    final_weights: np.ndarray
    config: TrainConfig
    spec: MechanismSpec | None
    privacy: PrivacyParams | None
    loss_trajectory: tuple[tuple[int, float], ...]
    metrics: dict = field(default_factory=dict)

    def curve(self) -> TradeoffCurve | None:
        """Composed trade-off curve of the run, recomputed from its mechanism spec."""
        return accounted_curve(self.spec) if self.spec is not None else None

    def to_json(self) -> dict:
        eps = None if self.privacy is None else _json_float(self.privacy.epsilon)
        return {
            "schema_version": SCHEMA_VERSION,
            "method": self.method,
            "config": self.config.to_json(),
            "mechanism": None if self.spec is None else dataclasses.asdict(self.spec),
            "epsilon": eps,
            "delta": None if self.privacy is None else self.privacy.delta,
            "metrics": self.metrics,
            "loss_trajectory": [list(p) for p in self.loss_trajectory],
            "weights_shape": list(self.final_weights.shape),
        }


def _json_float(x: float):
    return "inf" if math.isinf(x) else x


# ---------------------------------------------------------------------------
# accounting


def mechanism_spec(cfg: TrainConfig, n: int, sensitivity: float) -> MechanismSpec | None:
    """The subsampled Gaussian mechanism a run realizes; None without noise."""
    if cfg.sigma == 0 and sensitivity > 0:
        return None
    if sensitivity == 0:
        return MechanismSpec(0.0, 1.0, min(1.0, cfg.priv_batch_expected / n), cfg.steps)
    return MechanismSpec(sensitivity / cfg.priv_batch_expected, cfg.sigma,
                         min(1.0, cfg.priv_batch_expected / n), cfg.steps)


def account(spec: MechanismSpec | None, delta: float | None) -> PrivacyParams | None:
    if delta is None:
        return None
    if spec is None:
        return PrivacyParams(INFINITE_EPSILON, delta)
    return PrivacyParams(epsilon_for(spec, delta), delta)


def effective_clip(split: LossSplit | None, cfg: TrainConfig, full: bool = False) -> float:
    if cfg.clip is not None:
        return cfg.clip
    declared = None if split is None else (split.full_lipschitz if full else split.priv_lipschitz)
    if declared is None:
        if cfg.sigma == 0:
            # noiseless and unclipped: nothing to account
            return math.inf
        raise DomainError("set clip or use a split that declares its Lipschitz constant")
    return declared


# ---------------------------------------------------------------------------
# helpers shared by all trainers


def _rngs(seed: int) -> dict[str, np.random.Generator]:
    names = ("poisson", "public", "noise", "fill")
    children = np.random.SeedSequence(seed).spawn(len(names))
    return {name: np.random.default_rng(s) for name, s in zip(names, children)}


def _clip_rows(grads: np.ndarray, bound: float | None) -> np.ndarray:
    flat = grads.reshape(len(grads), int(np.prod(grads.shape[1:])))
    if bound is None or len(flat) == 0:
        return flat
    norms = np.linalg.norm(flat, axis=1)
    scale = np.minimum(1.0, bound / np.maximum(norms, 1e-300))
    return flat * scale[:, None]


def _project(w: np.ndarray, radius: float | None) -> np.ndarray:
    if radius is None:
        return w
    norm = float(np.linalg.norm(w))
    return w if norm <= radius else w * (radius / norm)


def _public_mean(split: LossSplit, w: np.ndarray, view: PublicView, rng) -> np.ndarray:
    if split.pub_factors is not None:
        total, _ = clipped_factor_sum(split.pub_factors(w, view, rng), None)
        return total.reshape(w.shape) / len(view)
    return split.pub_grad(w, view, rng).reshape(len(view), -1).mean(axis=0).reshape(w.shape)


def _public_indices(rng: np.random.Generator, n: int, size: int) -> np.ndarray:
    if size >= n:
        return np.arange(n)
    return rng.choice(n, size=size, replace=False)


class _Aggregator:
    def __init__(self, kind: str, steps: int):
        self.kind = kind
        self.start = 1 if kind == "uniform-average" else steps // 2 + 1
        self.total = None
        self.count = 0

    def add(self, step: int, w: np.ndarray) -> None:
        if self.kind != "last" and step >= self.start:
            self.total = w.copy() if self.total is None else self.total + w
            self.count += 1

    def result(self, last: np.ndarray) -> np.ndarray:
        return last if self.kind == "last" or self.count == 0 else self.total / self.count


def empirical_risk(split: LossSplit, w: np.ndarray, data: Batch) -> float:
    return float(np.mean(split.loss(w, data))) if len(data) else 0.0


def accuracy(split: LossSplit, w: np.ndarray, data: Batch) -> float | None:
    if split.predict is None or len(data) == 0:
        return None
    return float(np.mean(split.predict(w, data.features) == data.labels))


def _checkpoints(steps: int) -> set[int]:
    every = max(1, steps // 50)
    return set(range(every, steps + 1, every)) | {steps}


def _init_weights(split: LossSplit, init: ModelState | np.ndarray | None) -> tuple[np.ndarray, tuple]:
    if init is None:
        return np.zeros(split.weight_shape), ()
    if isinstance(init, ModelState):
        if ZERO_PRIVACY_COST not in init.flags:
            raise DomainError("initial state carries no zero-privacy-cost marker and cannot be accounted")
        return np.array(init.weights, dtype=float), init.flags
    return np.array(init, dtype=float), ()


def _run(method: str, data: Batch, split: LossSplit, cfg: TrainConfig, *,
         private_pool: Batch, public_pool: Batch, sampling_prob: float, use_public: bool,
         private_grad_fn, private_factors_fn, sensitivity: float, init, accounted_n: int,
         eval_data: Batch) -> TrainReport:
    split.check_inputs(private_pool)
    w, init_flags = _init_weights(split, init)
    rng = _rngs(cfg.seed)
    m = cfg.priv_batch_expected
    clip = cfg.clip
    sigma = cfg.sigma if sensitivity > 0 else 0.0
    velocity = np.zeros_like(w)
    agg = _Aggregator(cfg.aggregate, cfg.steps)
    checkpoints = _checkpoints(cfg.steps)
    trajectory = []
    n_priv = len(private_pool)
    for t in range(1, cfg.steps + 1):
        mask = rng["poisson"].random(n_priv) < sampling_prob
        chosen = private_pool.take(np.flatnonzero(mask))
        if private_factors_fn is not None:
            total, _ = clipped_factor_sum(private_factors_fn(w, chosen, rng["fill"]), clip)
            g_priv = total.reshape(w.shape) / m
        else:
            priv = _clip_rows(private_grad_fn(w, chosen, rng["fill"]), clip)
            g_priv = priv.sum(axis=0).reshape(w.shape) / m
        noise = sigma * rng["noise"].standard_normal(w.shape) if sigma > 0 else 0.0
        g = cfg.mix_ratio * (g_priv + noise)
        if use_public:
            idx = _public_indices(rng["public"], len(public_pool), cfg.pub_batch)
            view = public_view(public_pool.take(idx), split.schema)
            g = _public_mean(split, w, view, rng["fill"]) + g
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(t)
        if cfg.momentum:
            velocity = cfg.momentum * velocity + g
            g = velocity
        w = _project(w - cfg.learning_rate(t) * g, cfg.projection_radius)
        agg.add(t, w)
        if t in checkpoints:
            trajectory.append((t, empirical_risk(split, w, eval_data)))
    final = agg.result(w)
    spec = mechanism_spec(cfg, accounted_n, sensitivity)
    metrics: dict[str, Any] = {"empirical_risk": empirical_risk(split, final, eval_data)}
    acc = accuracy(split, final, eval_data)
    if acc is not None:
        metrics["train_accuracy"] = acc
    if init_flags:
        metrics["init_flags"] = list(init_flags)
    return TrainReport(method, final, cfg, spec, account(spec, cfg.delta), tuple(trajectory), metrics)


# ---------------------------------------------------------------------------
# public entry points


def train_fdp_sgd(dataset: Batch, split: LossSplit, cfg: TrainConfig,
                  init: ModelState | np.ndarray | None = None) -> TrainReport:
    """Noisy SGD where only the private part of the gradient is clipped and noised.

    Each step draws a Poisson batch of expected size ``m`` for the private
    gradient and an independent uniform batch of exactly ``pub_batch``
    records for the public gradient.
    """
    n = len(dataset)
    if n == 0:
        raise DomainError("dataset is empty")
    if cfg.priv_batch_expected > n:
        raise DomainError("priv_batch_expected exceeds the dataset size")
    c_eff = effective_clip(split, cfg)
    return _run("fdp-sgd", dataset, split, cfg, private_pool=dataset, public_pool=dataset,
                sampling_prob=cfg.priv_batch_expected / n, use_public=True,
                private_grad_fn=split.priv_grad, private_factors_fn=split.priv_factors, sensitivity=c_eff, init=init,
                accounted_n=n, eval_data=dataset)


def filler_record(public_value: PublicView, split: LossSplit) -> Batch:
    """A record whose public part is ``public_value`` and whose private fields are zero."""
    if len(public_value) != 1:
        raise SimulatorError("public_value must describe exactly one record")
    expected = int(split.schema.public_columns.sum())
    if public_value.features.shape[1] != expected:
        raise SimulatorError(f"public_value has {public_value.features.shape[1]} columns, the schema has {expected}")
    if split.schema.label_public and public_value.labels is None:
        raise SimulatorError("the label is public but public_value carries none")
    features = public_value.expand(0.0)
    label = public_value.labels if public_value.labels is not None else np.zeros(1, dtype=int)
    return Batch(features, np.asarray(label))


def simulate_fdp_sgd(dataset_without_target: Batch, public_value: PublicView | Batch,
                     split: LossSplit, cfg: TrainConfig,
                     init: ModelState | np.ndarray | None = None) -> TrainReport:
    """Simulator run that sees only the public part of the withheld record.

    The private batch is drawn from the known records at the mechanism's
    rate ``m / (n + 1)``; the public batch is drawn from the known records
    plus a zero-filled stand-in for the withheld one.
    """
    if isinstance(public_value, Batch):
        public_value = public_view(public_value, split.schema)
    filler = filler_record(public_value, split)
    n = len(dataset_without_target)
    pool = Batch(np.concatenate([dataset_without_target.features, filler.features]),
                 np.concatenate([dataset_without_target.labels, filler.labels]))
    if cfg.priv_batch_expected > n + 1:
        raise DomainError("priv_batch_expected exceeds the dataset size")
    c_eff = effective_clip(split, cfg)
    return _run("fdp-sgd-simulator", pool, split, cfg, private_pool=dataset_without_target,
                public_pool=pool, sampling_prob=cfg.priv_batch_expected / (n + 1), use_public=True,
                private_grad_fn=split.priv_grad, private_factors_fn=split.priv_factors, sensitivity=c_eff, init=init,
                accounted_n=n + 1, eval_data=pool)


def train_dpsgd_baseline(dataset: Batch, split: LossSplit, cfg: TrainConfig,
                         init: ModelState | np.ndarray | None = None) -> TrainReport:
    """Standard DP-SGD: clip and noise the full gradient of one Poisson batch."""
    n = len(dataset)
    if n == 0:
        raise DomainError("dataset is empty")
    if cfg.priv_batch_expected > n:
        raise DomainError("priv_batch_expected exceeds the dataset size")
    c_eff = effective_clip(split, cfg, full=True)
    return _run("dpsgd", dataset, split, cfg, private_pool=dataset, public_pool=dataset,
                sampling_prob=cfg.priv_batch_expected / n, use_public=False,
                private_grad_fn=lambda w, b, rng: split.full_grad(w, b),
                private_factors_fn=split.full_factors, sensitivity=c_eff,
                init=init, accounted_n=n, eval_data=dataset)


def public_pretrain(dataset: Batch, split: LossSplit, epochs: int, lr: float,
                    batch_size: int | None = None, seed: int = 0,
                    init: np.ndarray | None = None) -> ModelState:
    """Plain SGD on the public loss only; touches no private data."""
    if epochs < 0:
        raise DomainError("epochs must be >= 0")
    w = np.zeros(split.weight_shape) if init is None else np.array(init, dtype=float)
    rng = _rngs(seed)
    n = len(dataset)
    size = n if batch_size is None else min(batch_size, n)
    step = 0
    for _ in range(epochs):
        order = rng["public"].permutation(n) if size < n else np.arange(n)
        for start in range(0, n, size):
            idx = order[start:start + size]
            view = public_view(dataset.take(idx), split.schema)
            g = _public_mean(split, w, view, rng["fill"])
            if not np.all(np.isfinite(g)):
                raise NonFiniteGradientError(step)
            w = w - lr * g
            step += 1
    return ModelState(w, step, None, (ZERO_PRIVACY_COST,))


def public_only_baseline(dataset: Batch, split: LossSplit, cfg: TrainConfig) -> TrainReport:
    """Train on the public loss alone; accounted epsilon is zero."""
    epochs = max(1, cfg.steps * cfg.pub_batch // max(len(dataset), 1))
    state = public_pretrain(dataset, split, epochs, cfg.lr, cfg.pub_batch, cfg.seed)
    metrics: dict[str, Any] = {"empirical_risk": empirical_risk(split, state.weights, dataset)}
    acc = accuracy(split, state.weights, dataset)
    if acc is not None:
        metrics["train_accuracy"] = acc
    privacy = None if cfg.delta is None else PrivacyParams(0.0, cfg.delta)
    return TrainReport("public-only", state.weights, cfg, None, privacy, (), metrics)


# ---------------------------------------------------------------------------
# one-step sampler used by the distinguishing game


def sample_one_step(dataset: Batch, split: LossSplit, cfg: TrainConfig, n_runs: int, seed: int,
                    public_value: PublicView | None = None, chunk: int = 100_000,
                    init: np.ndarray | None = None) -> np.ndarray:
    """Outputs of ``n_runs`` independent one-step runs, vectorized across runs.

    With ``public_value`` the simulator is run on ``dataset`` (the records
    without the target); otherwise the mechanism is run on ``dataset``.
    Public gradients must be deterministic (no random fill).
    """
    if cfg.steps != 1:
        raise DomainError("sample_one_step runs exactly one step")
    w0 = np.zeros(split.weight_shape) if init is None else np.asarray(init, dtype=float)
    if public_value is None:
        private_pool, public_pool = dataset, dataset
        p = cfg.priv_batch_expected / len(dataset)
    else:
        filler = filler_record(public_value, split)
        private_pool = dataset
        public_pool = Batch(np.concatenate([dataset.features, filler.features]),
                            np.concatenate([dataset.labels, filler.labels]))
        p = cfg.priv_batch_expected / (len(dataset) + 1)
    priv = _clip_rows(split.priv_grad(w0, private_pool), cfg.clip) / cfg.priv_batch_expected
    pub = split.pub_grad(w0, public_view(public_pool, split.schema)).reshape(len(public_pool), -1)
    rng = _rngs(seed)
    eta = cfg.learning_rate(1)
    out = []
    for start in range(0, n_runs, chunk):
        r = min(chunk, n_runs - start)
        mask = rng["poisson"].random((r, len(private_pool))) < p
        g = cfg.mix_ratio * (mask @ priv + cfg.sigma * rng["noise"].standard_normal((r, priv.shape[1])))
        size = min(cfg.pub_batch, len(public_pool))
        if size >= len(public_pool):
            g = g + pub.mean(axis=0)
        else:
            picks = np.argsort(rng["public"].random((r, len(public_pool))), axis=1)[:, :size]
            g = g + pub[picks].mean(axis=1)
        w = w0.reshape(1, -1) - eta * g
        if cfg.projection_radius is not None:
            norms = np.linalg.norm(w, axis=1, keepdims=True)
            w = w * np.minimum(1.0, cfg.projection_radius / np.maximum(norms, 1e-300))
        out.append(w)
    return np.concatenate(out).reshape((n_runs,) + tuple(split.weight_shape))


# ---------------------------------------------------------------------------
# weights on disk


def save_weights(path, weights: np.ndarray, seed: int | None = None) -> None:
    """Flat little-endian float64 vector preceded by a one-line JSON header."""
    w = np.ascontiguousarray(weights, dtype="<f8")
    header = {"schema_version": SCHEMA_VERSION, "dims": list(w.shape), "dtype": "<f8", "seed": seed}
    with Path(path).open("wb") as fh:
        fh.write((json.dumps(header) + "\n").encode())
        fh.write(w.tobytes())


def load_weights(path) -> tuple[np.ndarray, dict]:
    raw = Path(path).read_bytes()
    head, _, body = raw.partition(b"\n")
    header = json.loads(head)
    w = np.frombuffer(body, dtype=header["dtype"]).reshape(header["dims"])
    return w.copy(), header
