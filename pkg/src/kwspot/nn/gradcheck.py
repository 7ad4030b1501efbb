"""Central finite-difference verification of analytic gradients."""

import numpy as np

from .losses import loss_and_grad
from .network import backward, forward


def relative_error(a, b):
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 and nb == 0.0:
        return 0.0
    return float(np.linalg.norm(a - b) / max(na, nb, 1e-12))


def _loss_value(spec, state, x, target, loss_kind):
    out, _ = forward(spec, state, x, mode="eval")
    return loss_and_grad(loss_kind, out, target)[0]


def check_gradients(spec, state, x, target, loss_kind, h=1e-6):
    """Compare backprop gradients to central finite differences.

    Returns a dict of per-tensor relative errors (norm ratio), with key
    "<input>" for the input gradient. Runs in eval mode so dropout layers
    are the identity and the loss is deterministic.
    """
    x = np.asarray(x, dtype=np.float64)
    out, caches = forward(spec, state, x, mode="eval")
    _, gloss = loss_and_grad(loss_kind, out, target)
    grads, gx = backward(spec, state, caches, gloss)

    errors = {}
    for key, w in state.params.items():
        fd = np.zeros_like(w)
        flat = w.reshape(-1)
        fd_flat = fd.reshape(-1)
        for i in range(flat.shape[0]):
            orig = flat[i]
            step = h * max(1.0, abs(orig))
            flat[i] = orig + step
            lp = _loss_value(spec, state, x, target, loss_kind)
            flat[i] = orig - step
            lm = _loss_value(spec, state, x, target, loss_kind)
            flat[i] = orig
            fd_flat[i] = (lp - lm) / (2.0 * step)
        errors[key] = relative_error(grads[key], fd)

    fdx = np.zeros_like(x)
    xflat = x.reshape(-1)
    fdx_flat = fdx.reshape(-1)
    for i in range(xflat.shape[0]):
        orig = xflat[i]
        step = h * max(1.0, abs(orig))
        xflat[i] = orig + step
        lp = _loss_value(spec, state, x, target, loss_kind)
        xflat[i] = orig - step
        lm = _loss_value(spec, state, x, target, loss_kind)
        xflat[i] = orig
        fdx_flat[i] = (lp - lm) / (2.0 * step)
    errors["<input>"] = relative_error(gx, fdx)
    return errors
