"""Layer definitions: specs, forward passes, and exact backward passes.

Tensor conventions: dense activations are (B, F); convolutional activations
are (B, C, H, W). Dense layers flatten higher-rank inputs automatically.
Convolutions are valid (no padding) with stride 1; max pooling is 2x2
stride 2 (excess rows/columns are cropped). All math happens in the dtype
of the parameters (float64 reference, float32 fast path).
"""

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError


@dataclass(frozen=True)
class Dense:
    units: int


@dataclass(frozen=True)
class TiedDense:
    """Dense layer whose weight is the transpose of an earlier Dense layer.

    `source` is the index of the owning Dense layer in the layer list. The
    tied layer contributes its own bias; weight gradients accumulate into
    the source parameter.
    """

    source: int


@dataclass(frozen=True)
class Conv2d:
    filters: int
    kernel_h: int
    kernel_w: int


@dataclass(frozen=True)
class MaxPool2d:
    size: int = 2
    stride: int = 2


@dataclass(frozen=True)
class GlobalTemporalMaxPool:
    """Max over all spatial positions per channel: (B, C, H, W) -> (B, C)."""


@dataclass(frozen=True)
class Dropout:
    p: float = 0.5


@dataclass(frozen=True)
class Activation:
    name: str  # relu | leaky_relu | tanh | sigmoid | softmax | identity
    alpha: float = 0.0


LAYER_KINDS = (Dense, TiedDense, Conv2d, MaxPool2d, GlobalTemporalMaxPool, Dropout, Activation)


def _im2col(x, kh, kw):
    """Patch matrix in channels-last inner order: (B*OH*OW, kh*kw*C).

    The input is transposed to channels-last once; each kernel offset then
    contributes a contiguous block copy, which is much faster than gathering
    a strided 6-D view.
    """
    b, c, h, w = x.shape
    oh, ow = h - kh + 1, w - kw + 1
    x_cl = np.ascontiguousarray(x.transpose(0, 2, 3, 1))
    col = np.empty((b, oh, ow, kh, kw, c), dtype=x.dtype)
    for di in range(kh):
        for dj in range(kw):
            col[:, :, :, di, dj, :] = x_cl[:, di : di + oh, dj : dj + ow, :]
    return col.reshape(b * oh * ow, kh * kw * c), oh, ow


def _w_mat(weight):
    f, c, kh, kw = weight.shape
    # (F, C, kh, kw) -> (kh*kw*C, F), matching the _im2col inner order
    return np.ascontiguousarray(weight.transpose(2, 3, 1, 0).reshape(kh * kw * c, f))


def _col2im(gcol, x_shape, kh, kw):
    b, c, h, w = x_shape
    oh, ow = h - kh + 1, w - kw + 1
    gx_cl = np.zeros((b, h, w, c), dtype=gcol.dtype)
    g6 = gcol.reshape(b, oh, ow, kh, kw, c)
    for di in range(kh):
        for dj in range(kw):
            gx_cl[:, di : di + oh, dj : dj + ow, :] += g6[:, :, :, di, dj, :]
    return np.ascontiguousarray(gx_cl.transpose(0, 3, 1, 2))


def conv2d_forward(x, weight, bias):
    f, c, kh, kw = weight.shape
    if x.ndim != 4 or x.shape[1] != c:
        raise ShapeError(f"conv2d expected (B,{c},H,W), got {x.shape}")
    if x.shape[2] < kh or x.shape[3] < kw:
        raise ShapeError(f"conv2d input {x.shape[2:]} smaller than kernel ({kh},{kw})")
    col, oh, ow = _im2col(x, kh, kw)
    out = col @ _w_mat(weight) + bias
    y = out.reshape(x.shape[0], oh, ow, f).transpose(0, 3, 1, 2)
    return np.ascontiguousarray(y), col


def conv2d_backward(gy, x_shape, col, weight):
    f, c, kh, kw = weight.shape
    b = x_shape[0]
    oh, ow = x_shape[2] - kh + 1, x_shape[3] - kw + 1
    gmat = np.ascontiguousarray(gy.transpose(0, 2, 3, 1)).reshape(b * oh * ow, f)
    gw_mat = col.T @ gmat  # (kh*kw*C, F)
    gw = np.ascontiguousarray(gw_mat.reshape(kh, kw, c, f).transpose(3, 2, 0, 1))
    gb = gmat.sum(axis=0)
    gcol = gmat @ _w_mat(weight).T
    gx = _col2im(gcol, x_shape, kh, kw)
    return gx, gw, gb


def maxpool_forward(x, size, stride):
    if size != stride:
        raise ShapeError("pooling currently requires size == stride")
    b, c, h, w = x.shape
    oh, ow = h // size, w // size
    if oh < 1 or ow < 1:
        raise ShapeError(f"maxpool window {size} too large for input {x.shape}")
    xc = x[:, :, : oh * size, : ow * size]
    r = xc.reshape(b, c, oh, size, ow, size).transpose(0, 1, 2, 4, 3, 5)
    r = r.reshape(b, c, oh, ow, size * size)
    arg = r.argmax(axis=-1)
    y = np.take_along_axis(r, arg[..., None], axis=-1)[..., 0]
    return y, arg


def maxpool_backward(gy, x_shape, arg, size):
    b, c, h, w = x_shape
    oh, ow = h // size, w // size
    gr = np.zeros((b, c, oh, ow, size * size), dtype=gy.dtype)
    np.put_along_axis(gr, arg[..., None], gy[..., None], axis=-1)
    gx = np.zeros(x_shape, dtype=gy.dtype)
    gx[:, :, : oh * size, : ow * size] = (
        gr.reshape(b, c, oh, ow, size, size).transpose(0, 1, 2, 4, 3, 5).reshape(b, c, oh * size, ow * size)
    )
    return gx


def global_maxpool_forward(x):
    if x.ndim != 4:
        raise ShapeError(f"global pooling expected (B,C,H,W), got {x.shape}")
    b, c = x.shape[:2]
    flat = x.reshape(b, c, -1)
    arg = flat.argmax(axis=-1)
    y = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
    return y, arg


def global_maxpool_backward(gy, x_shape, arg):
    b, c = x_shape[:2]
    gflat = np.zeros((b, c, int(np.prod(x_shape[2:]))), dtype=gy.dtype)
    np.put_along_axis(gflat, arg[..., None], gy[..., None], axis=-1)
    return gflat.reshape(x_shape)


def activation_forward(name, alpha, x):
    if name == "relu":
        return np.maximum(x, 0.0)
    if name == "leaky_relu":
        return np.where(x >= 0.0, x, alpha * x)
    if name == "tanh":
        return np.tanh(x)
    if name == "sigmoid":
        return 1.0 / (1.0 + np.exp(-x))
    if name == "softmax":
        z = x - x.max(axis=-1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=-1, keepdims=True)
    if name == "identity":
        return x
    raise ShapeError(f"unknown activation {name!r}")


def activation_backward(name, alpha, x, y, gy):
    if name == "relu":
        return np.where(x > 0.0, gy, 0.0)
    if name == "leaky_relu":
        return np.where(x >= 0.0, gy, alpha * gy)
    if name == "tanh":
        return gy * (1.0 - y * y)
    if name == "sigmoid":
        return gy * y * (1.0 - y)
    if name == "softmax":
        inner = (gy * y).sum(axis=-1, keepdims=True)
        return y * (gy - inner)
    if name == "identity":
        return gy
    raise ShapeError(f"unknown activation {name!r}")
