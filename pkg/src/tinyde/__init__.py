"""Tiny ensembles of normalization layers over shared weights."""

__version__ = "0.1.0"

from .ensemble import NormBank, TinyDEModel, softmax
from .layers import (EnsembleNormParams, Linear, NormParams,
                     ensemblenorm_backward, ensemblenorm_forward,
                     linear_backward, linear_forward, norm_backward,
                     norm_forward, relu6_backward, relu6_forward)
from .training import (Optimizer, TrainConfig, TrainLog, loss_cross_entropy,
                       loss_gaussian_nll, loss_mse, train_full,
                       train_member_norms, train_single_shot, train_two_phase)
from .uncertainty import (UncertaintyReport, ensemble_variance,
                          max_disagreement, predictive_entropy,
                          regression_nll)

__all__ = [
    "EnsembleNormParams", "Linear", "NormBank", "NormParams", "Optimizer",
    "TinyDEModel", "TrainConfig", "TrainLog", "UncertaintyReport",
    "ensemble_variance", "ensemblenorm_backward", "ensemblenorm_forward",
    "linear_backward", "linear_forward", "loss_cross_entropy",
    "loss_gaussian_nll", "loss_mse", "max_disagreement", "norm_backward",
    "norm_forward", "predictive_entropy", "regression_nll", "relu6_backward",
    "relu6_forward", "softmax", "train_full", "train_member_norms",
    "train_single_shot", "train_two_phase",
]
