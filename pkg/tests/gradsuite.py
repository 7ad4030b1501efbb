"""Randomized gradient-check cases, shared by the unit tests and the
acceptance suite. Each case builds a small network featuring one layer kind
(or one loss), runs the finite-difference checker, and returns the worst
relative error."""

import numpy as np

from kwspot.nn import (
    Activation,
    CATEGORICAL_CROSS_ENTROPY,
    Conv2d,
    Dense,
    Dropout,
    GlobalTemporalMaxPool,
    MaxPool2d,
    NetworkSpec,
    SQUARED_ERROR,
    SUMMED_BINARY_CROSS_ENTROPY,
    TiedDense,
    build_state,
    check_gradients,
    forward,
)


def _distinct_tensor(rng, shape, scale=0.05):
    """Values with pairwise gaps >> the FD step, so max-pool argmaxes are stable."""
    n = int(np.prod(shape))
    return (rng.permutation(n).astype(np.float64) * scale - 0.5 * scale * n).reshape(shape)


def _one_hot(rng, b, k):
    t = np.zeros((b, k))
    t[np.arange(b), rng.integers(0, k, size=b)] = 1.0
    return t


def _case_dense(rng):
    b = int(rng.integers(1, 4))
    n_in = int(rng.integers(1, 7))
    n_out = int(rng.integers(1, 6))
    spec = NetworkSpec((n_in,), [Dense(n_out), Activation("tanh")])
    x = rng.normal(size=(b, n_in))
    y = rng.normal(size=(b, n_out))
    return spec, x, y, SQUARED_ERROR


def _case_conv2d(rng):
    b = int(rng.integers(1, 3))
    c = int(rng.integers(1, 4))
    h = int(rng.integers(2, 7))
    w = int(rng.integers(2, 7))
    kh = int(rng.integers(1, h + 1))
    kw = int(rng.integers(1, w + 1))
    f = int(rng.integers(1, 4))
    spec = NetworkSpec((c, h, w), [Conv2d(f, kh, kw), Activation("tanh")])
    x = rng.normal(size=(b, c, h, w))
    y = rng.normal(size=(b,) + spec.output_shape)
    return spec, x, y, SQUARED_ERROR


def _case_maxpool(rng):
    b = int(rng.integers(1, 3))
    c = int(rng.integers(1, 3))
    h = int(rng.integers(2, 7))
    w = int(rng.integers(2, 7))
    spec = NetworkSpec((c, h, w), [MaxPool2d(), Dense(int(rng.integers(1, 4))), Activation("tanh")])
    x = _distinct_tensor(rng, (b, c, h, w))
    y = rng.normal(size=(b,) + spec.output_shape)
    return spec, x, y, SQUARED_ERROR


def _case_global_pool(rng):
    b = int(rng.integers(1, 3))
    c = int(rng.integers(1, 4))
    t = int(rng.integers(2, 9))
    spec = NetworkSpec((c, 1, t), [GlobalTemporalMaxPool(), Dense(2), Activation("tanh")])
    x = _distinct_tensor(rng, (b, c, 1, t))
    y = rng.normal(size=(b, 2))
    return spec, x, y, SQUARED_ERROR


def _case_tied_dense(rng):
    b = int(rng.integers(1, 4))
    n_in = int(rng.integers(1, 6))
    hidden = int(rng.integers(1, 6))
    spec = NetworkSpec(
        (n_in,), [Dense(hidden), Activation("tanh"), TiedDense(0), Activation("identity")]
    )
    x = rng.normal(size=(b, n_in))
    y = rng.normal(size=(b, n_in))
    return spec, x, y, SQUARED_ERROR


def _case_dropout_eval(rng):
    b = int(rng.integers(1, 4))
    n_in = int(rng.integers(1, 6))
    spec = NetworkSpec((n_in,), [Dense(4), Dropout(0.5), Activation("tanh"), Dense(2)])
    x = rng.normal(size=(b, n_in))
    y = rng.normal(size=(b, 2))
    return spec, x, y, SQUARED_ERROR


def _case_loss_cce(rng):
    b = int(rng.integers(1, 4))
    n_in = int(rng.integers(2, 6))
    k = int(rng.integers(2, 6))
    spec = NetworkSpec((n_in,), [Dense(k), Activation("softmax")])
    x = rng.normal(size=(b, n_in))
    y = _one_hot(rng, b, k)
    return spec, x, y, CATEGORICAL_CROSS_ENTROPY


def _case_loss_summed_bce(rng):
    b = int(rng.integers(1, 4))
    n_in = int(rng.integers(2, 6))
    k = int(rng.integers(1, 6))
    spec = NetworkSpec((n_in,), [Dense(k), Activation("sigmoid")])
    x = rng.normal(size=(b, n_in))
    y = rng.uniform(0.05, 0.95, size=(b, k))
    return spec, x, y, SUMMED_BINARY_CROSS_ENTROPY


def _case_loss_squared(rng):
    b = int(rng.integers(1, 4))
    n_in = int(rng.integers(1, 6))
    spec = NetworkSpec((n_in,), [Dense(3), Activation("identity")])
    x = rng.normal(size=(b, n_in))
    y = rng.normal(size=(b, 3))
    return spec, x, y, SQUARED_ERROR


def _case_leaky_relu(rng):
    # keep pre-activations away from the kink so finite differences are valid
    b = int(rng.integers(1, 3))
    n_in = int(rng.integers(2, 6))
    spec = NetworkSpec((n_in,), [Dense(4), Activation("leaky_relu", alpha=1.0 / 3.0), Dense(2)])
    for attempt in range(50):
        x = rng.normal(size=(b, n_in))
        state = build_state(spec, int(rng.integers(1 << 31)))
        pre, _ = forward(NetworkSpec((n_in,), [Dense(4)]), state, x)
        if np.abs(pre).min() > 1e-3:
            break
    y = rng.normal(size=(b, 2))
    return spec, x, y, SQUARED_ERROR, state


CASES = {
    "dense": _case_dense,
    "conv2d": _case_conv2d,
    "maxpool": _case_maxpool,
    "global_temporal_maxpool": _case_global_pool,
    "tied_dense": _case_tied_dense,
    "dropout_eval": _case_dropout_eval,
    "loss_categorical_cross_entropy": _case_loss_cce,
    "loss_summed_binary_cross_entropy": _case_loss_summed_bce,
    "loss_squared_error": _case_loss_squared,
    "leaky_relu": _case_leaky_relu,
}


def run_case(name, seed):
    rng = np.random.default_rng(seed)
    built = CASES[name](rng)
    if len(built) == 5:
        spec, x, y, loss_kind, state = built
    else:
        spec, x, y, loss_kind = built
        state = build_state(spec, int(rng.integers(1 << 31)))
        for key in state.params:  # nonzero biases exercise every gradient path
            state.params[key] = state.params[key] + 0.01 * rng.normal(size=state.params[key].shape)
    errors = check_gradients(spec, state, x, y, loss_kind)
    return max(errors.values()), errors
