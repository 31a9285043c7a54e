"""Minimal 1-d CNN engine: layers, losses, backprop, SGD and layer freezing."""

from .estimator import CNNClassifier
from .layers import (
    conv1d_forward,
    cross_entropy_loss,
    fc_forward,
    maxpool1d_forward,
    softmax,
    softmax_cross_entropy,
)
from .model import (
    LayerSpec,
    ModelParams,
    Network,
    init_params,
    loss_and_gradients,
    har_architecture,
    predict_proba,
)
from .optim import TrainResult, sgd_step, train

__all__ = [
    "CNNClassifier",
    "LayerSpec",
    "ModelParams",
    "Network",
    "TrainResult",
    "conv1d_forward",
    "cross_entropy_loss",
    "fc_forward",
    "init_params",
    "loss_and_gradients",
    "maxpool1d_forward",
    "har_architecture",
    "predict_proba",
    "sgd_step",
    "softmax",
    "softmax_cross_entropy",
    "train",
]
