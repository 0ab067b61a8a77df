"""Noisy SGD with public features, loss splits and baselines."""

from featuredp.sgd.losses import (
    BASE_LOSSES,
    Batch,
    FeatureSchema,
    LinearLoss,
    LossSplit,
    PublicView,
    binary_logistic,
    logistic_split,
    masking_split,
    padding_split,
    public_view,
    quadratic_split,
    softmax_cross_entropy,
)
from featuredp.sgd.train import (
    ModelState,
    TrainConfig,
    TrainReport,
    load_weights,
    public_only_baseline,
    public_pretrain,
    sample_one_step,
    save_weights,
    simulate_fdp_sgd,
    train_dpsgd_baseline,
    train_fdp_sgd,
)

__all__ = [
    "BASE_LOSSES", "Batch", "FeatureSchema", "LinearLoss", "LossSplit", "ModelState", "PublicView",
    "TrainConfig", "TrainReport", "binary_logistic", "load_weights", "logistic_split", "masking_split",
    "padding_split", "public_only_baseline", "public_pretrain", "public_view", "quadratic_split",
    "sample_one_step", "save_weights", "simulate_fdp_sgd", "softmax_cross_entropy",
    "train_dpsgd_baseline", "train_fdp_sgd",
]
