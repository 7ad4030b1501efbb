import numpy as np
import pytest

from kwspot.nn import (
    Activation,
    Dense,
    NetworkSpec,
    SQUARED_ERROR,
    backward,
    build_state,
    forward,
    loss_and_grad,
)

from gradsuite import CASES, run_case


@pytest.mark.parametrize("kind", sorted(CASES))
@pytest.mark.parametrize("seed", range(5))
def test_gradients_match_finite_differences(kind, seed):
    worst, errors = run_case(kind, seed=1000 * seed + hash(kind) % 997)
    assert worst < 1e-4, f"{kind} seed {seed}: {errors}"


def test_zero_upstream_gradient_gives_zero_param_gradients():
    rng = np.random.default_rng(0)
    spec = NetworkSpec((5,), [Dense(4), Activation("tanh"), Dense(3)])
    state = build_state(spec, 7)
    x = rng.normal(size=(2, 5))
    out, caches = forward(spec, state, x)
    grads, gx = backward(spec, state, caches, np.zeros_like(out))
    assert all(np.all(g == 0.0) for g in grads.values())
    assert np.all(gx == 0.0)


def test_summed_bce_gradient_vanishes_at_targets():
    rng = np.random.default_rng(1)
    target = rng.uniform(0.05, 0.95, size=(3, 6))
    _, grad = loss_and_grad("summed_binary_cross_entropy", target.copy(), target)
    assert np.abs(grad).max() < 1e-9
