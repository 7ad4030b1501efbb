"""Mini-batch training with early stopping.

Training is a pure function of (seed, data, spec): per-epoch shuffling and
dropout masks derive from SeedSequence([state.seed, epoch]), so repeated
runs are bit-identical and a run resumed from a saved state matches the
uninterrupted one.

Examples may have heterogeneous input shapes (variable-length utterances);
they are bucketed by shape and batches never mix shapes.
"""

import numpy as np

from ..errors import ConfigError
from .losses import loss_and_grad
from .network import forward, backward
from .optim import optimizer_step


def _to_examples(dataset):
    if isinstance(dataset, tuple) and len(dataset) == 2:
        xs, ys = dataset
        return [(np.asarray(x), np.asarray(y)) for x, y in zip(xs, ys)]
    return [(np.asarray(x), np.asarray(y)) for x, y in dataset]


def _bucket(examples):
    buckets = {}
    for x, y in examples:
        buckets.setdefault(x.shape, []).append((x, y))
    out = []
    for shape in sorted(buckets, key=str):
        xs, ys = zip(*buckets[shape])
        out.append((np.stack(xs), np.stack(ys)))
    return out


def _epoch_rng(seed, epoch):
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, int(epoch)]))


def evaluate_loss(spec, state, examples, loss_kind, batch_size=256):
    total = 0.0
    count = 0
    for xb, yb in _bucket(examples):
        for lo in range(0, xb.shape[0], batch_size):
            x = xb[lo : lo + batch_size]
            y = yb[lo : lo + batch_size]
            out, _ = forward(spec, state, x, mode="eval")
            value, _ = loss_and_grad(loss_kind, out, y)
            total += value * x.shape[0]
            count += x.shape[0]
    return total / max(count, 1)


def train(
    spec,
    state,
    dataset,
    loss_kind,
    opt,
    epochs,
    batch_size,
    monitor=None,
    patience=None,
    start_epoch=0,
    log_every=0,
):
    """Train in place; returns (state, history).

    `monitor` is an optional held-out example collection; with `patience`
    set, training stops after that many epochs without improvement and the
    best-monitored parameters are restored. History records per-epoch train
    and monitor losses.
    """
    examples = _to_examples(dataset)
    if not examples:
        raise ConfigError("empty training set")
    mon_examples = _to_examples(monitor) if monitor is not None else None
    if patience is not None and mon_examples is None:
        raise ConfigError("early stopping requested without a monitor set")
    buckets = _bucket(examples)

    history = {"train_loss": [], "monitor_loss": [], "best_epoch": None, "stopped_epoch": None}
    best_loss = np.inf
    best_params = None
    best_epoch = -1
    stale = 0

    for epoch in range(start_epoch, epochs):
        rng = _epoch_rng(state.seed, epoch)
        batches = []
        for xb, yb in buckets:
            order = rng.permutation(xb.shape[0])
            for lo in range(0, len(order), batch_size):
                sel = order[lo : lo + batch_size]
                batches.append((xb[sel], yb[sel]))
        rng.shuffle(batches)

        total = 0.0
        seen = 0
        for x, y in batches:
            out, caches = forward(spec, state, x, mode="train", rng=rng)
            value, gloss = loss_and_grad(loss_kind, out, y)
            grads, _ = backward(spec, state, caches, gloss.astype(state.dtype))
            optimizer_step(opt, state, grads, epoch)
            total += value * x.shape[0]
            seen += x.shape[0]
        train_loss = total / seen
        history["train_loss"].append(train_loss)

        if mon_examples is not None:
            mon_loss = evaluate_loss(spec, state, mon_examples, loss_kind)
            history["monitor_loss"].append(mon_loss)
            if mon_loss < best_loss:
                best_loss = mon_loss
                best_params = state.copy_params()
                best_epoch = epoch
                stale = 0
            else:
                stale += 1
            if log_every and (epoch % log_every == 0):
                print(f"epoch {epoch}: train {train_loss:.6f} monitor {mon_loss:.6f}")
            if patience is not None and stale > patience:
                history["stopped_epoch"] = epoch
                break
        elif log_every and (epoch % log_every == 0):
            print(f"epoch {epoch}: train {train_loss:.6f}")

    if best_params is not None:
        state.params = best_params
        history["best_epoch"] = best_epoch
    return state, history
