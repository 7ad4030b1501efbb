"""Optimisers (Nesterov SGD, Adam, Adadelta) with a per-epoch linear
learning-rate schedule.

Update rules (w: parameter, g: gradient, lr: rate at the current epoch):

  sgd_nesterov:  v <- mu*v + g;  w <- w - lr*(g + mu*v)
  adam:          m <- b1*m + (1-b1)*g;  v <- b2*v + (1-b2)*g^2
                 w <- w - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
  adadelta:      Eg <- rho*Eg + (1-rho)*g^2
                 dx <- -sqrt(Ed + eps)/sqrt(Eg + eps) * g
                 Ed <- rho*Ed + (1-rho)*dx^2;  w <- w + lr*dx
                 (lr defaults to 1.0: adadelta derives its own step size)
"""

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, NumericError

SGD_NESTEROV = "sgd_nesterov"
ADAM = "adam"
ADADELTA = "adadelta"


@dataclass
class OptimizerSpec:
    kind: str
    lr_start: float = 1e-3
    lr_end: float = None  # None: constant rate
    total_epochs: int = 1
    momentum: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    rho: float = 0.95
    adadelta_eps: float = 1e-6

    def __post_init__(self):
        if self.kind not in (SGD_NESTEROV, ADAM, ADADELTA):
            raise ConfigError(f"unknown optimizer kind {self.kind!r}")
        if self.lr_start <= 0 or (self.lr_end is not None and self.lr_end <= 0):
            raise ConfigError("learning-rate schedule endpoints must be positive")

    def learning_rate(self, epoch):
        """Linear interpolation from lr_start (epoch 0) to lr_end (last epoch)."""
        if self.lr_end is None or self.total_epochs <= 1:
            return self.lr_start
        frac = min(max(epoch / (self.total_epochs - 1), 0.0), 1.0)
        return self.lr_start + (self.lr_end - self.lr_start) * frac


def default_adadelta():
    return OptimizerSpec(ADADELTA, lr_start=1.0)


def init_slots(opt, params):
    zeros = lambda: {k: np.zeros_like(v) for k, v in params.items()}
    if opt.kind == SGD_NESTEROV:
        return {"velocity": zeros()}
    if opt.kind == ADAM:
        return {"m": zeros(), "v": zeros(), "scalars": {"t": 0}}
    return {"acc_grad": zeros(), "acc_delta": zeros()}


def optimizer_step(opt, state, grads, epoch):
    """Apply one update in place. Raises NumericError on non-finite gradients."""
    for key, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for parameter {key}")
    if not state.opt_slots:
        state.opt_slots = init_slots(opt, state.params)
    lr = state.dtype(opt.learning_rate(epoch))
    slots = state.opt_slots

    if opt.kind == SGD_NESTEROV:
        mu = state.dtype(opt.momentum)
        for key, w in state.params.items():
            g = grads[key]
            v = slots["velocity"][key]
            v *= mu
            v += g
            w -= lr * (g + mu * v)
        return state

    if opt.kind == ADAM:
        b1 = state.dtype(opt.beta1)
        b2 = state.dtype(opt.beta2)
        slots["scalars"]["t"] += 1
        t = slots["scalars"]["t"]
        c1 = state.dtype(1.0 - float(b1) ** t)
        c2 = state.dtype(1.0 - float(b2) ** t)
        for key, w in state.params.items():
            g = grads[key]
            m = slots["m"][key]
            v = slots["v"][key]
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            w -= lr * (m / c1) / (np.sqrt(v / c2) + state.dtype(opt.eps))
        return state

    rho = state.dtype(opt.rho)
    eps = state.dtype(opt.adadelta_eps)
    for key, w in state.params.items():
        g = grads[key]
        eg = slots["acc_grad"][key]
        ed = slots["acc_delta"][key]
        eg *= rho
        eg += (1 - rho) * g * g
        dx = -np.sqrt(ed + eps) / np.sqrt(eg + eps) * g
        ed *= rho
        ed += (1 - rho) * dx * dx
        w += lr * dx
    return state
