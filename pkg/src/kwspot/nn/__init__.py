"""Minimal deterministic neural-network engine."""

from .layers import (
    Activation,
    Conv2d,
    Dense,
    Dropout,
    GlobalTemporalMaxPool,
    MaxPool2d,
    TiedDense,
)
from .losses import (
    CATEGORICAL_CROSS_ENTROPY,
    SQUARED_ERROR,
    SUMMED_BINARY_CROSS_ENTROPY,
    loss,
    loss_and_grad,
)
from .network import NetworkSpec, NetworkState, backward, build_state, forward
from .optim import ADADELTA, ADAM, SGD_NESTEROV, OptimizerSpec, default_adadelta, optimizer_step
from .serialize import load_state, save_state
from .train import evaluate_loss, train
from .gradcheck import check_gradients, relative_error

__all__ = [
    "Activation",
    "Conv2d",
    "Dense",
    "Dropout",
    "GlobalTemporalMaxPool",
    "MaxPool2d",
    "TiedDense",
    "CATEGORICAL_CROSS_ENTROPY",
    "SQUARED_ERROR",
    "SUMMED_BINARY_CROSS_ENTROPY",
    "loss",
    "loss_and_grad",
    "NetworkSpec",
    "NetworkState",
    "backward",
    "build_state",
    "forward",
    "ADADELTA",
    "ADAM",
    "SGD_NESTEROV",
    "OptimizerSpec",
    "default_adadelta",
    "optimizer_step",
    "load_state",
    "save_state",
    "evaluate_loss",
    "train",
    "check_gradients",
    "relative_error",
]
