"""Losses: categorical cross-entropy, summed binary cross-entropy, squared error.

All losses return the mean over the batch of the per-example loss together
with the gradient w.r.t. the prediction. Logarithm arguments are clamped to
[EPS, 1 - EPS] with EPS = 1e-12.
"""

import numpy as np

from ..errors import ShapeError

EPS = 1e-12

CATEGORICAL_CROSS_ENTROPY = "categorical_cross_entropy"
SUMMED_BINARY_CROSS_ENTROPY = "summed_binary_cross_entropy"
SQUARED_ERROR = "squared_error"

KINDS = (CATEGORICAL_CROSS_ENTROPY, SUMMED_BINARY_CROSS_ENTROPY, SQUARED_ERROR)


def loss_and_grad(kind, prediction, target):
    pred = np.asarray(prediction, dtype=np.float64)
    tgt = np.asarray(target, dtype=np.float64)
    if pred.shape != tgt.shape:
        raise ShapeError(f"prediction {pred.shape} vs target {tgt.shape}")
    b = pred.shape[0]

    if kind == CATEGORICAL_CROSS_ENTROPY:
        p = np.clip(pred, EPS, 1.0 - EPS)
        value = float(-(tgt * np.log(p)).sum() / b)
        grad = -(tgt / p) / b
        return value, grad

    if kind == SUMMED_BINARY_CROSS_ENTROPY:
        p = np.clip(pred, EPS, 1.0 - EPS)
        per = -(tgt * np.log(p) + (1.0 - tgt) * np.log(1.0 - p))
        value = float(per.sum() / b)
        grad = (-(tgt / p) + (1.0 - tgt) / (1.0 - p)) / b
        return value, grad

    if kind == SQUARED_ERROR:
        diff = pred - tgt
        value = float((diff * diff).sum() / b)
        grad = 2.0 * diff / b
        return value, grad

    raise ShapeError(f"unknown loss kind {kind!r}")


def loss(kind, prediction, target):
    return loss_and_grad(kind, prediction, target)[0]
