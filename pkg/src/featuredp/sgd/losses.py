"""Losses split into a private part and a part that only reads public features.

Gradients are computed per example on whole batches.  A public gradient is
only ever evaluated on a ``PublicView``, which physically drops the private
columns (and the label when it is private), so no code path can leak them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special

from featuredp.errors import DomainError, NormViolationError, SchemaError

_NORM_SLACK = 1e-9


@dataclass(frozen=True)
class Batch:
    features: np.ndarray
    labels: np.ndarray

    def __len__(self) -> int:
        return len(self.features)

    def take(self, idx) -> "Batch":
        return Batch(self.features[idx], self.labels[idx])


@dataclass(frozen=True)
class FeatureSchema:
    """Which feature columns, and whether the label, may leak."""

    public_columns: np.ndarray
    label_public: bool

    @classmethod
    def from_private(cls, total_columns: int, private_columns, label_public: bool = True) -> "FeatureSchema":
        mask = np.ones(total_columns, dtype=bool)
        private = list(private_columns)
        if any(not 0 <= c < total_columns for c in private):
            raise SchemaError(f"private columns {private} fall outside [0, {total_columns})")
        mask[private] = False
        return cls(mask, label_public)

    @classmethod
    def from_public(cls, total_columns: int, public_columns, label_public: bool = True) -> "FeatureSchema":
        mask = np.zeros(total_columns, dtype=bool)
        public = list(public_columns)
        if any(not 0 <= c < total_columns for c in public):
            raise SchemaError(f"public columns {public} fall outside [0, {total_columns})")
        mask[public] = True
        return cls(mask, label_public)

    @property
    def total_columns(self) -> int:
        return len(self.public_columns)


@dataclass(frozen=True)
class PublicView:
    """The public part of a batch: public columns only, label only if public."""

    features: np.ndarray
    labels: np.ndarray | None
    schema: FeatureSchema

    def __len__(self) -> int:
        return len(self.features)

    def expand(self, fill: np.ndarray | float = 0.0) -> np.ndarray:
        """Full-width features with private columns taken from ``fill``."""
        n = len(self.features)
        out = np.empty((n, self.schema.total_columns))
        private = ~self.schema.public_columns
        out[:, self.schema.public_columns] = self.features
        out[:, private] = fill if np.isscalar(fill) else np.asarray(fill).reshape(n, -1)
        return out


def public_view(batch: Batch, schema: FeatureSchema) -> PublicView:
    if batch.features.shape[1] != schema.total_columns:
        raise SchemaError(
            f"batch has {batch.features.shape[1]} columns but the schema declares {schema.total_columns}"
        )
    labels = batch.labels if schema.label_public else None
    return PublicView(batch.features[:, schema.public_columns], labels, schema)


# ---------------------------------------------------------------------------
# base losses on linear models


@dataclass(frozen=True)
class LinearLoss:
    """Per-example loss and gradient of a linear model ``features @ w``."""

    name: str
    loss: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    residual: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    weight_shape: Callable[[int], tuple]
    predict: Callable[[np.ndarray, np.ndarray], np.ndarray]

    def grad(self, w, x, y):
        """Per-example gradients: the outer product of input and residual."""
        r = self.residual(w, x, y)
        return x[:, :, None] * r[:, None, :] if r.ndim == 2 else x * r[:, None]

    def factors(self, w, x, y) -> list:
        r = self.residual(w, x, y)
        return [(x, r if r.ndim == 2 else r[:, None])]


def _one_hot(labels: np.ndarray, k: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=int)
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise DomainError(f"labels must lie in [0, {k})")
    return np.eye(k)[labels]


def softmax_cross_entropy(num_classes: int) -> LinearLoss:
    k = num_classes

    def loss(w, x, y):
        logits = x @ w
        return special.logsumexp(logits, axis=1) - logits[np.arange(len(x)), np.asarray(y, dtype=int)]

    def residual(w, x, y):
        return special.softmax(x @ w, axis=1) - _one_hot(y, k)

    return LinearLoss(
        f"softmax-ce(k={k})", loss, residual, lambda d: (d, k),
        lambda w, x: np.argmax(x @ w, axis=1),
    )


def binary_logistic() -> LinearLoss:
    """Logistic loss with labels in {0, 1} and a weight vector."""

    def loss(w, x, y):
        z = x @ w
        return np.logaddexp(0.0, z) - np.asarray(y, dtype=float) * z

    def residual(w, x, y):
        return special.expit(x @ w) - np.asarray(y, dtype=float)

    return LinearLoss("logistic", loss, residual, lambda d: (d,), lambda w, x: (x @ w > 0).astype(int))


BASE_LOSSES = {"softmax-ce": softmax_cross_entropy, "logistic": lambda k=2: binary_logistic()}


def expand_factors(factors: list) -> np.ndarray:
    """Per-example gradients from ``(inputs, residuals)`` factors."""
    out = sum(x[:, :, None] * r[:, None, :] for x, r in factors)
    return out[:, :, 0] if out.shape[2] == 1 else out


def clipped_factor_sum(factors: list, bound: float | None) -> tuple[np.ndarray, np.ndarray]:
    """Sum of per-example gradients, each clipped to ``bound``, and the per-example norms."""
    sq = 0.0
    for a, (xa, ra) in enumerate(factors):
        for b, (xb, rb) in enumerate(factors):
            if b < a:
                continue
            term = np.einsum("ij,ij->i", xa, xb) * np.einsum("ij,ij->i", ra, rb)
            sq = sq + (term if a == b else 2.0 * term)
    norms = np.sqrt(np.maximum(sq, 0.0))
    scale = np.ones_like(norms) if bound is None else np.minimum(1.0, bound / np.maximum(norms, 1e-300))
    total = sum(x.T @ (r * scale[:, None]) for x, r in factors)
    return total, norms


# ---------------------------------------------------------------------------
# splits


@dataclass(frozen=True)
class LossSplit:
    """A loss ``l = l_priv + l_pub`` where ``l_pub`` reads only public data.

    ``pub_fn`` receives a ``PublicView`` and an rng (used by random fills).
    ``priv_fn``, when given, is a closed form for ``full - pub``; otherwise
    the private gradient is computed as that difference with the same fill.

    Linear models may also supply ``*_factors``: lists of ``(inputs, residuals)``
    with per-example gradient ``sum_k outer(inputs_k[i], residuals_k[i])``.
    Trainers use them to clip and sum without materializing every gradient.
    """

    name: str
    schema: FeatureSchema
    weight_shape: tuple
    loss: Callable[[np.ndarray, Batch], np.ndarray]
    full_fn: Callable[[np.ndarray, Batch], np.ndarray]
    pub_fn: Callable[[np.ndarray, PublicView, np.random.Generator | None], np.ndarray]
    priv_lipschitz: float | None = None
    full_lipschitz: float | None = None
    priv_fn: Callable[[np.ndarray, Batch], np.ndarray] | None = None
    predict: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    input_norm_bound: float | None = None
    pub_factors: Callable | None = None
    priv_factors: Callable | None = None
    full_factors: Callable | None = None

    def check_inputs(self, batch: Batch) -> None:
        if self.input_norm_bound is None or len(batch) == 0:
            return
        norms = np.linalg.norm(batch.features, axis=1)
        worst = int(np.argmax(norms))
        if norms[worst] > self.input_norm_bound + _NORM_SLACK:
            raise NormViolationError(
                f"row {worst} has norm {norms[worst]:.6g} > bound {self.input_norm_bound:g}"
            )

    def full_grad(self, w: np.ndarray, batch: Batch) -> np.ndarray:
        return self.full_fn(w, batch)

    def pub_grad(self, w: np.ndarray, view: PublicView | Batch, rng: np.random.Generator | None = None) -> np.ndarray:
        if isinstance(view, Batch):
            view = public_view(view, self.schema)
        return self.pub_fn(w, view, rng)

    def priv_grad(self, w: np.ndarray, batch: Batch, rng: np.random.Generator | None = None) -> np.ndarray:
        if self.priv_fn is not None:
            return self.priv_fn(w, batch)
        return self.full_fn(w, batch) - self.pub_grad(w, batch, rng)


def logistic_split(num_features: int, num_classes: int) -> LossSplit:
    """Multiclass logistic regression with a private label and public features.

    The public loss is ``logsumexp(x @ w)``, whose gradient ``x softmax(x @ w)^T``
    never reads the label; the private loss is ``-(x @ w) . y`` with gradient
    ``-x y^T``.  With ``||x|| <= 1`` the private gradient has norm at most 1
    and the full gradient at most ``sqrt(2)``.
    """
    if num_features < 1 or num_classes < 1:
        raise DomainError("num_features and num_classes must be >= 1")
    k = num_classes
    base = softmax_cross_entropy(k)
    schema = FeatureSchema(np.ones(num_features, dtype=bool), label_public=False)

    def pub_factors(w, view, rng):
        return [(view.features, special.softmax(view.features @ w, axis=1))]

    def priv_factors(w, batch, rng):
        return [(batch.features, -_one_hot(batch.labels, k))]

    return LossSplit(
        f"logistic(d={num_features},k={k})", schema, (num_features, k),
        lambda w, b: base.loss(w, b.features, b.labels),
        lambda w, b: base.grad(w, b.features, b.labels),
        lambda w, view, rng: expand_factors(pub_factors(w, view, rng)),
        1.0, float(np.sqrt(2.0)), lambda w, b: expand_factors(priv_factors(w, b, None)),
        base.predict, input_norm_bound=1.0, pub_factors=pub_factors, priv_factors=priv_factors,
        full_factors=lambda w, b, rng: base.factors(w, b.features, b.labels),
    )


def _fill_split(name: str, schema: FeatureSchema, base: LinearLoss, fill: str,
                priv_lipschitz: float | None, full_lipschitz: float | None,
                input_norm_bound: float | None) -> LossSplit:
    d = schema.total_columns
    n_private = int((~schema.public_columns).sum())

    def filled(view, rng):
        if fill == "gaussian" and n_private:
            if rng is None:
                raise DomainError("a Gaussian fill needs an rng")
            return view.expand(rng.standard_normal((len(view), n_private)))
        return view.expand(0.0)

    def pub(w, view, rng):
        return base.grad(w, filled(view, rng), view.labels)

    def pub_factors(w, view, rng):
        return base.factors(w, filled(view, rng), view.labels)

    def priv_factors(w, batch, rng):
        (x_pub, r_pub), = pub_factors(w, public_view(batch, schema), rng)
        (x, r), = base.factors(w, batch.features, batch.labels)
        return [(x, r), (x_pub, -r_pub)]

    return LossSplit(
        name, schema, base.weight_shape(d),
        lambda w, b: base.loss(w, b.features, b.labels),
        lambda w, b: base.grad(w, b.features, b.labels),
        pub, priv_lipschitz, full_lipschitz, None, base.predict, input_norm_bound,
        pub_factors, priv_factors, lambda w, b, rng: base.factors(w, b.features, b.labels),
    )


def padding_split(public_columns, total_columns: int, base_loss: LinearLoss,
                  priv_lipschitz: float | None = None, full_lipschitz: float | None = None,
                  input_norm_bound: float | None = None) -> LossSplit:
    """Public loss evaluates ``base_loss`` with private columns redrawn from N(0, 1)."""
    public_columns = list(public_columns)
    if len(set(public_columns)) != len(public_columns):
        raise SchemaError("public columns contain duplicates")
    schema = FeatureSchema.from_public(total_columns, public_columns, label_public=True)
    return _fill_split(f"padding({base_loss.name})", schema, base_loss, "gaussian",
                       priv_lipschitz, full_lipschitz, input_norm_bound)


def masking_split(private_columns, total_columns: int, base_loss: LinearLoss,
                  priv_lipschitz: float | None = None, full_lipschitz: float | None = None,
                  input_norm_bound: float | None = None) -> LossSplit:
    """Public loss evaluates ``base_loss`` with private columns set to zero."""
    private_columns = list(private_columns)
    if len(set(private_columns)) != len(private_columns):
        raise SchemaError("private columns contain duplicates")
    schema = FeatureSchema.from_private(total_columns, private_columns, label_public=True)
    return _fill_split(f"masking({base_loss.name})", schema, base_loss, "zero",
                       priv_lipschitz, full_lipschitz, input_norm_bound)


def quadratic_split(dim: int, strength: float, private_columns=(), data_radius: float = 1.0,
                    weight_radius: float | None = None) -> LossSplit:
    """``(strength / 2) ||w - z||^2`` with the public loss seeing ``z`` masked.

    The private gradient ``-strength * z_private`` does not depend on ``w``,
    so its Lipschitz constant is ``strength * data_radius``.  The full
    gradient is bounded by ``strength * (weight_radius + data_radius)`` on
    the ball of radius ``weight_radius``.
    """
    if strength <= 0:
        raise DomainError("strength must be positive")
    schema = FeatureSchema.from_private(dim, private_columns, label_public=True)
    public = schema.public_columns

    def loss(w, b):
        return 0.5 * strength * np.sum((w - b.features) ** 2, axis=1)

    def full(w, b):
        return strength * (w - b.features)

    def pub(w, view, rng):
        return strength * (w - view.expand(0.0))

    def priv(w, b):
        return -strength * np.where(public, 0.0, b.features)

    full_lip = strength * (weight_radius + data_radius) if weight_radius is not None else None
    priv_lip = strength * data_radius if len(list(private_columns)) else 0.0
    return LossSplit(
        f"quadratic(d={dim},strength={strength})", schema, (dim,), loss, full, pub,
        priv_lip, full_lip, priv, None, data_radius,
    )
