"""Network assembly: shape inference, initialisation, forward and backward.

A NetworkSpec is an ordered layer list plus the input shape; a NetworkState
maps parameter keys ("<layer_index>.W" / ".b") to ndarrays. Tied layers own
no weight: they read the source layer's array (shared storage) and their
weight gradients accumulate into the source key.
"""

import hashlib
from dataclasses import dataclass, field

import numpy as np

from ..errors import NumericError, ShapeError
from . import layers as L


@dataclass
class NetworkSpec:
    """Ordered layer stack plus the input shape.

    A dimension given as None is variable (e.g. the time axis of an
    utterance); it must be collapsed by global pooling before any dense
    layer.
    """

    input_shape: tuple
    layers: list

    def __post_init__(self):
        self.input_shape = tuple(None if d is None else int(d) for d in self.input_shape)
        self.shapes = _infer_shapes(self.input_shape, self.layers)

    @property
    def output_shape(self):
        return self.shapes[-1]

    def canonical_text(self):
        dims = ["var" if d is None else str(d) for d in self.input_shape]
        lines = [f"input {'x'.join(dims)}"]
        for ly in self.layers:
            if isinstance(ly, L.Dense):
                lines.append(f"dense units={ly.units}")
            elif isinstance(ly, L.TiedDense):
                lines.append(f"tied_dense source={ly.source}")
            elif isinstance(ly, L.Conv2d):
                lines.append(f"conv2d filters={ly.filters} kernel={ly.kernel_h}x{ly.kernel_w}")
            elif isinstance(ly, L.MaxPool2d):
                lines.append(f"maxpool size={ly.size} stride={ly.stride}")
            elif isinstance(ly, L.GlobalTemporalMaxPool):
                lines.append("global_temporal_maxpool")
            elif isinstance(ly, L.Dropout):
                lines.append(f"dropout p={ly.p}")
            elif isinstance(ly, L.Activation):
                lines.append(f"activation {ly.name} alpha={ly.alpha}")
            else:
                raise ShapeError(f"unknown layer {ly!r}")
        return "\n".join(lines) + "\n"

    def hash(self):
        return hashlib.sha256(self.canonical_text().encode()).digest()


def _flat_dim(shape):
    if any(d is None for d in shape):
        raise ShapeError(
            f"shape {shape} has a variable dimension; collapse it with global pooling first"
        )
    return int(np.prod(shape))


def _infer_shapes(input_shape, layer_list):
    shapes = []
    cur = tuple(input_shape)
    for idx, ly in enumerate(layer_list):
        if isinstance(ly, L.Dense):
            cur = (ly.units,)
        elif isinstance(ly, L.TiedDense):
            src = layer_list[ly.source]
            if not isinstance(src, L.Dense):
                raise ShapeError(f"layer {idx}: tied source {ly.source} is not a dense layer")
            src_in = _flat_dim(shapes[ly.source - 1] if ly.source > 0 else input_shape)
            if _flat_dim(cur) != src.units:
                raise ShapeError(
                    f"layer {idx}: tied_dense input {cur} incompatible with transposed "
                    f"source weight ({src_in}x{src.units})"
                )
            cur = (src_in,)
        elif isinstance(ly, L.Conv2d):
            if len(cur) != 3:
                raise ShapeError(f"layer {idx}: conv2d needs (C,H,W) input, got {cur}")
            c, h, w = cur
            if (h is not None and h < ly.kernel_h) or (w is not None and w < ly.kernel_w):
                raise ShapeError(
                    f"layer {idx}: conv2d kernel ({ly.kernel_h},{ly.kernel_w}) larger than input ({h},{w})"
                )
            cur = (
                ly.filters,
                None if h is None else h - ly.kernel_h + 1,
                None if w is None else w - ly.kernel_w + 1,
            )
        elif isinstance(ly, L.MaxPool2d):
            if len(cur) != 3:
                raise ShapeError(f"layer {idx}: maxpool needs (C,H,W) input, got {cur}")
            c, h, w = cur
            if h is None or w is None:
                raise ShapeError(f"layer {idx}: maxpool does not support variable dimensions")
            if h // ly.size < 1 or w // ly.size < 1:
                raise ShapeError(f"layer {idx}: maxpool window {ly.size} too large for ({h},{w})")
            cur = (c, h // ly.size, w // ly.size)
        elif isinstance(ly, L.GlobalTemporalMaxPool):
            if len(cur) != 3:
                raise ShapeError(f"layer {idx}: global pooling needs (C,H,W) input, got {cur}")
            cur = (cur[0],)
        elif isinstance(ly, (L.Dropout, L.Activation)):
            pass
        else:
            raise ShapeError(f"layer {idx}: unknown layer kind {type(ly).__name__}")
        shapes.append(cur)
    return shapes


@dataclass
class NetworkState:
    params: dict
    seed: int
    dtype: object = np.float64
    opt_slots: dict = field(default_factory=dict)

    def copy_params(self):
        return {k: v.copy() for k, v in self.params.items()}

    def astype(self, dtype):
        return NetworkState(
            {k: v.astype(dtype) for k, v in self.params.items()},
            self.seed,
            dtype,
            {
                name: {k: (v.astype(dtype) if isinstance(v, np.ndarray) else v) for k, v in grp.items()}
                for name, grp in self.opt_slots.items()
            },
        )


def _next_activation(layer_list, idx):
    for ly in layer_list[idx + 1 :]:
        if isinstance(ly, L.Activation):
            return ly.name
        if not isinstance(ly, L.Dropout):
            break
    return "identity"


def _init_weight(rng, shape, fan_in, fan_out, activation):
    if activation in ("relu", "leaky_relu"):
        limit = np.sqrt(6.0 / fan_in)
    else:
        limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def build_state(spec, seed, dtype=np.float64):
    """Initialise parameters: He-uniform before (leaky-)ReLU, Glorot-uniform
    otherwise, zero biases. Deterministic in the seed."""
    rng = np.random.default_rng(seed)
    params = {}
    cur = spec.input_shape
    for idx, ly in enumerate(spec.layers):
        act = _next_activation(spec.layers, idx)
        if isinstance(ly, L.Dense):
            fan_in = _flat_dim(cur)
            params[f"{idx}.W"] = _init_weight(rng, (fan_in, ly.units), fan_in, ly.units, act).astype(dtype)
            params[f"{idx}.b"] = np.zeros(ly.units, dtype=dtype)
        elif isinstance(ly, L.TiedDense):
            params[f"{idx}.b"] = np.zeros(spec.shapes[idx], dtype=dtype)
        elif isinstance(ly, L.Conv2d):
            c = cur[0]
            fan_in = c * ly.kernel_h * ly.kernel_w
            fan_out = ly.filters * ly.kernel_h * ly.kernel_w
            params[f"{idx}.W"] = _init_weight(
                rng, (ly.filters, c, ly.kernel_h, ly.kernel_w), fan_in, fan_out, act
            ).astype(dtype)
            params[f"{idx}.b"] = np.zeros(ly.filters, dtype=dtype)
        cur = spec.shapes[idx]
    return NetworkState(params, seed, dtype)


def forward(spec, state, x, mode="eval", rng=None):
    """Run the network; returns (output, caches).

    `mode` is "train" or "eval". Dropout draws masks from `rng` only in
    train mode (inverted dropout: eval is a pure pass-through). Shape
    mismatches raise ShapeError naming the offending layer.
    """
    if mode not in ("train", "eval"):
        raise ShapeError(f"mode must be 'train' or 'eval', got {mode!r}")
    x = np.asarray(x, dtype=state.dtype)
    got = x.shape[1:]
    ok = len(got) == len(spec.input_shape) and all(
        want is None or want == have for want, have in zip(spec.input_shape, got)
    )
    if not ok:
        raise ShapeError(f"input shape {got} does not match spec {spec.input_shape}")
    caches = []
    for idx, ly in enumerate(spec.layers):
        try:
            if isinstance(ly, L.Dense):
                orig = x.shape
                flat = x.reshape(x.shape[0], -1)
                y = flat @ state.params[f"{idx}.W"] + state.params[f"{idx}.b"]
                caches.append(("dense", orig, flat))
            elif isinstance(ly, L.TiedDense):
                w = state.params[f"{ly.source}.W"]
                orig = x.shape
                flat = x.reshape(x.shape[0], -1)
                y = flat @ w.T + state.params[f"{idx}.b"]
                caches.append(("tied", orig, flat))
            elif isinstance(ly, L.Conv2d):
                y, col = L.conv2d_forward(x, state.params[f"{idx}.W"], state.params[f"{idx}.b"])
                caches.append(("conv", x.shape, col))
            elif isinstance(ly, L.MaxPool2d):
                y, arg = L.maxpool_forward(x, ly.size, ly.stride)
                caches.append(("pool", x.shape, arg))
            elif isinstance(ly, L.GlobalTemporalMaxPool):
                y, arg = L.global_maxpool_forward(x)
                caches.append(("gpool", x.shape, arg))
            elif isinstance(ly, L.Dropout):
                if mode == "train":
                    if rng is None:
                        raise ShapeError("train-mode forward through dropout needs an rng")
                    mask = (rng.random(x.shape) >= ly.p).astype(state.dtype) / state.dtype(1.0 - ly.p)
                    y = x * mask
                    caches.append(("dropout", mask))
                else:
                    y = x
                    caches.append(("dropout", None))
            elif isinstance(ly, L.Activation):
                y = L.activation_forward(ly.name, ly.alpha, x)
                caches.append(("act", x, y))
            else:
                raise ShapeError(f"unknown layer kind {type(ly).__name__}")
        except ShapeError as exc:
            raise ShapeError(f"layer {idx} ({type(ly).__name__}): {exc}") from exc
        x = y
    return x, caches


def backward(spec, state, caches, gy):
    """Backpropagate; returns (grads keyed like params, input gradient).

    Tied layers accumulate their weight gradient into the source key.
    """
    if len(caches) != len(spec.layers):
        raise ShapeError("cache does not match spec (stale or truncated)")
    grads = {k: np.zeros_like(v) for k, v in state.params.items()}
    g = np.asarray(gy, dtype=state.dtype)
    for idx in range(len(spec.layers) - 1, -1, -1):
        ly = spec.layers[idx]
        cache = caches[idx]
        if isinstance(ly, L.Dense):
            _, orig, flat = cache
            grads[f"{idx}.W"] += flat.T @ g
            grads[f"{idx}.b"] += g.sum(axis=0)
            g = (g @ state.params[f"{idx}.W"].T).reshape(orig)
        elif isinstance(ly, L.TiedDense):
            _, orig, flat = cache
            grads[f"{ly.source}.W"] += (flat.T @ g).T
            grads[f"{idx}.b"] += g.sum(axis=0)
            g = (g @ state.params[f"{ly.source}.W"]).reshape(orig)
        elif isinstance(ly, L.Conv2d):
            _, x_shape, col = cache
            g, gw, gb = L.conv2d_backward(g, x_shape, col, state.params[f"{idx}.W"])
            grads[f"{idx}.W"] += gw
            grads[f"{idx}.b"] += gb
        elif isinstance(ly, L.MaxPool2d):
            _, x_shape, arg = cache
            g = L.maxpool_backward(g, x_shape, arg, ly.size)
        elif isinstance(ly, L.GlobalTemporalMaxPool):
            _, x_shape, arg = cache
            g = L.global_maxpool_backward(g, x_shape, arg)
        elif isinstance(ly, L.Dropout):
            mask = cache[1]
            if mask is not None:
                g = g * mask
        elif isinstance(ly, L.Activation):
            _, x_in, y_out = cache
            g = L.activation_backward(ly.name, ly.alpha, x_in, y_out, g)
    if not np.all(np.isfinite(g)):
        raise NumericError("non-finite input gradient")
    return grads, g
