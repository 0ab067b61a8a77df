"""Reproducible synthetic datasets with known ground truth."""

from __future__ import annotations

from typing import Callable

import numpy as np

from featuredp.errors import DomainError
from featuredp.harness.data import Column, DatasetManifest, FeatureDataset

KINDS = ("purchase-like", "criteo-like", "label-dp-gaussian", "strongly-convex-quadratic")


def _manifest(num_features: int, public: set[int], label_role: str, n: int,
              norm_bound: float | None, kinds: dict[int, str] | None = None) -> DatasetManifest:
    kinds = kinds or {}
    cols = [Column(f"x{j}", kinds.get(j, "numeric"), "public" if j in public else "private")
            for j in range(num_features)]
    cols.append(Column("label", "label", label_role))
    return DatasetManifest(tuple(cols), n, norm_bound)


def purchase_like(size: int = 10_000, dims: int = 600, seed: int = 0, public_dims: int = 100,
                  num_classes: int = 10, public_signal: float = 0.5, temperature: float = 0.5) -> FeatureDataset:
    """Standard normal features, labels from a planted linear model.

    The first ``public_dims`` columns and the label are public.  A share
    ``public_signal`` of the planted logit variance comes from the public
    columns.  Standard normal features match the Gaussian padding used for
    the public loss, so the padded record has the right marginal law.
    """
    if not 0 < public_dims <= dims:
        raise DomainError("public_dims must lie in (0, dims]")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((size, dims))
    w = rng.standard_normal((dims, num_classes))
    pub_scale = np.sqrt(public_signal / public_dims)
    priv_scale = np.sqrt((1 - public_signal) / max(dims - public_dims, 1))
    w[:public_dims] *= pub_scale
    w[public_dims:] *= priv_scale
    w *= 3.0
    logits = x @ w + temperature * rng.gumbel(size=(size, num_classes))
    y = np.argmax(logits, axis=1)
    manifest = _manifest(dims, set(range(public_dims)), "public", size, None)
    return FeatureDataset(manifest, x, y, ground_truth={"kind": "purchase-like", "planted_weights_norm": float(np.linalg.norm(w))})


def criteo_like(size: int = 10_000, dims: int = 40, seed: int = 0, numeric_dims: int = 13,
                cardinality: int = 8) -> FeatureDataset:
    """Public numeric columns, private categorical columns, public binary label."""
    if not 0 < numeric_dims < dims:
        raise DomainError("numeric_dims must lie in (0, dims)")
    rng = np.random.default_rng(seed)
    n_cat = dims - numeric_dims
    num = rng.standard_normal((size, numeric_dims)) / np.sqrt(numeric_dims)
    cat = rng.integers(0, cardinality, size=(size, n_cat))
    w_num = rng.standard_normal(numeric_dims)
    w_cat = rng.standard_normal((n_cat, cardinality)) / np.sqrt(n_cat)
    score = 0.5 * num @ w_num + w_cat[np.arange(n_cat), cat].sum(axis=1)
    y = (score + rng.logistic(size=size) > 0).astype(int)
    features = np.hstack([num, cat.astype(float)])
    kinds = {j: "categorical" for j in range(numeric_dims, dims)}
    manifest = _manifest(dims, set(range(numeric_dims)), "public", size, None, kinds)
    categories = {f"x{j}": [str(v) for v in range(cardinality)] for j in range(numeric_dims, dims)}
    # codes index the declared category list, so every level is present even if unseen
    return FeatureDataset(manifest, features, y, categories, {"kind": "criteo-like"})


def label_dp_gaussian(size: int = 10_000, dims: int = 20, seed: int = 0, margin: float = 1.0) -> FeatureDataset:
    """Linearly separable two-class data with a private label, scaled into the unit ball.

    Before scaling every point lies at distance ``margin`` from the planted
    hyperplane through the origin.
    """
    if margin <= 0:
        raise DomainError("margin must be > 0")
    rng = np.random.default_rng(seed)
    direction = rng.standard_normal(dims)
    direction /= np.linalg.norm(direction)
    y = rng.integers(0, 2, size=size)
    noise = rng.standard_normal((size, dims))
    noise -= np.outer(noise @ direction, direction)
    x = noise + np.outer((2 * y - 1) * margin, direction)
    scale = float(np.linalg.norm(x, axis=1).max()) if size else 1.0
    x /= scale
    manifest = _manifest(dims, set(range(dims)), "private", size, 1.0)
    return FeatureDataset(manifest, x, y, ground_truth={
        "kind": "label-dp-gaussian", "separator": direction.tolist(), "margin": margin / scale})


def strongly_convex_quadratic(size: int = 100, dims: int = 10, seed: int = 0, strength: float = 0.5,
                              radius: float = 1.0, private_dims: int | None = None) -> FeatureDataset:
    """Points in a ball of ``radius`` for the loss ``(strength/2)||w - z||^2``.

    The empirical risk is minimized at the mean of the points.  The second
    half of the columns is private unless ``private_dims`` says otherwise.
    """
    if strength <= 0:
        raise DomainError("strength must be > 0")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((size, dims))
    z *= (radius * rng.random(size) ** (1.0 / dims) / np.linalg.norm(z, axis=1))[:, None]
    private = dims // 2 if private_dims is None else private_dims
    manifest = _manifest(dims, set(range(dims - private)), "public", size, radius)
    return FeatureDataset(manifest, z, np.zeros(size, dtype=int), ground_truth={
        "kind": "strongly-convex-quadratic", "strength": strength, "radius": radius,
        "minimizer": z.mean(axis=0).tolist(), "private_columns": list(range(dims - private, dims))})


GENERATORS: dict[str, Callable[..., FeatureDataset]] = {
    "purchase-like": purchase_like,
    "criteo-like": criteo_like,
    "label-dp-gaussian": label_dp_gaussian,
    "strongly-convex-quadratic": strongly_convex_quadratic,
}

_DEFAULT_DIMS = {"purchase-like": 600, "criteo-like": 40, "label-dp-gaussian": 20, "strongly-convex-quadratic": 10}


def synth_generate(kind: str, size: int, dims: int | None = None, seed: int = 0, **options) -> FeatureDataset:
    if kind not in GENERATORS:
        raise DomainError(f"unknown kind {kind!r}; expected one of {KINDS}")
    if size < 1:
        raise DomainError("size must be >= 1")
    return GENERATORS[kind](size=size, dims=dims or _DEFAULT_DIMS[kind], seed=seed, **options)
