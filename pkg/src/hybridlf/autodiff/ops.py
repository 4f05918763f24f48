"""Network operators built on :mod:`hybridlf.autodiff.tensor`."""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import Tensor, as_tensor, concat, mean, sub, tabs


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible; the message names the axis."""


# -- raw numpy kernels ---------------------------------------------------------


def _pad(x: np.ndarray, padding: int) -> np.ndarray:
    if padding == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))


def _windows(x: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    win = sliding_window_view(x, (kh, kw), axis=(2, 3))
    if stride > 1:
        win = win[:, :, ::stride, ::stride]
    return win


def conv_forward(x: np.ndarray, w: np.ndarray, stride: int = 1, padding: int = 0) -> np.ndarray:
    """Cross-correlation of ``x`` [B,C,H,W] with ``w`` [O,C,kh,kw]; no bias."""
    kh, kw = w.shape[2:]
    win = _windows(_pad(x, padding), kh, kw, stride)
    out = np.einsum("bchwij,ocij->bohw", win, w, optimize=True)
    return np.ascontiguousarray(out, dtype=x.dtype)


def conv_input_grad(g: np.ndarray, w: np.ndarray, stride: int, padding: int, in_hw) -> np.ndarray:
    """Adjoint of :func:`conv_forward` with respect to its input."""
    B, O, Ho, Wo = g.shape
    kh, kw = w.shape[2:]
    H, W = in_hw
    if stride > 1:
        dil = np.zeros((B, O, (Ho - 1) * stride + 1, (Wo - 1) * stride + 1), dtype=g.dtype)
        dil[:, :, ::stride, ::stride] = g
        g = dil
    # full correlation with the flipped, channel-swapped kernel
    wt = np.ascontiguousarray(w[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))
    ph, pw = kh - 1 - padding, kw - 1 - padding
    g = np.pad(g, ((0, 0), (0, 0), (max(ph, 0), max(ph, 0)), (max(pw, 0), max(pw, 0))))
    out = conv_forward(g, wt)
    ch, cw = max(-ph, 0), max(-pw, 0)
    out = out[:, :, ch:out.shape[2] - ch, cw:out.shape[3] - cw]
    # rows of the padded input never touched by a window receive zero gradient
    if out.shape[2] < H or out.shape[3] < W:
        out = np.pad(out, ((0, 0), (0, 0), (0, H - out.shape[2]), (0, W - out.shape[3])))
    return np.ascontiguousarray(out)


def conv_weight_grad(x: np.ndarray, g: np.ndarray, kshape, stride: int, padding: int) -> np.ndarray:
    kh, kw = kshape
    win = _windows(_pad(x, padding), kh, kw, stride)
    win = win[:, :, : g.shape[2], : g.shape[3]]
    return np.ascontiguousarray(np.einsum("bohw,bchwij->ocij", g, win, optimize=True))


# -- differentiable ops --------------------------------------------------------


def _check_rank(name: str, t: Tensor, rank: int, what: str) -> None:
    if t.ndim != rank:
        raise ShapeError(f"{name}: {what} must have rank {rank}, got shape {t.shape}")


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride: int = 1, padding: int = 0) -> Tensor:
    x, weight = as_tensor(x), as_tensor(weight)
    _check_rank("conv2d", x, 4, "input")
    _check_rank("conv2d", weight, 4, "weight")
    B, C, H, W = x.shape
    O, Cw, kh, kw = weight.shape
    if Cw != C:
        raise ShapeError(f"conv2d: channel axis (dim 1) of input is {C} but weight expects {Cw}")
    if kh % 2 == 0 or kw % 2 == 0:
        raise ShapeError(f"conv2d: kernel axes (dims 2,3) must be odd, got {kh}x{kw}")
    if padding < 0 or stride < 1:
        raise ShapeError(f"conv2d: invalid stride={stride} / padding={padding}")
    for axis, n, k in ((2, H, kh), (3, W, kw)):
        span = n + 2 * padding - k
        if span < 0 or span % stride:
            raise ShapeError(
                f"conv2d: spatial axis (dim {axis}) of size {n} incompatible with "
                f"kernel {k}, stride {stride}, padding {padding}"
            )
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (O,):
            raise ShapeError(f"conv2d: bias must have shape ({O},), got {bias.shape}")

    out = conv_forward(x.data, weight.data, stride, padding)
    if bias is not None:
        out += bias.data[None, :, None, None]

    def bw(g):
        gx = conv_input_grad(g, weight.data, stride, padding, (H, W)) if x.requires_grad else None
        gw = conv_weight_grad(x.data, g, (kh, kw), stride, padding) if weight.requires_grad else None
        gb = g.sum(axis=(0, 2, 3)) if bias is not None and bias.requires_grad else None
        return gx, gw, gb

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor._from_op(out, parents, bw, "conv2d")


def transposed_conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride: int = 1, padding: int = 0) -> Tensor:
    """Adjoint of :func:`conv2d`; ``weight`` has layout [C_in, C_out, kh, kw]."""
    x, weight = as_tensor(x), as_tensor(weight)
    _check_rank("transposed_conv2d", x, 4, "input")
    _check_rank("transposed_conv2d", weight, 4, "weight")
    B, C, H, W = x.shape
    Cw, O, kh, kw = weight.shape
    if Cw != C:
        raise ShapeError(f"transposed_conv2d: channel axis (dim 1) of input is {C} but weight expects {Cw}")
    if stride < 1 or padding < 0:
        raise ShapeError(f"transposed_conv2d: invalid stride={stride} / padding={padding}")
    Ho = (H - 1) * stride - 2 * padding + kh
    Wo = (W - 1) * stride - 2 * padding + kw
    if Ho < 1 or Wo < 1:
        raise ShapeError(f"transposed_conv2d: non-positive output size {Ho}x{Wo}")
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (O,):
            raise ShapeError(f"transposed_conv2d: bias must have shape ({O},), got {bias.shape}")

    out = conv_input_grad(x.data, weight.data, stride, padding, (Ho, Wo))
    if bias is not None:
        out = out + bias.data[None, :, None, None]

    def bw(g):
        gx = conv_forward(g, weight.data, stride, padding) if x.requires_grad else None
        gw = conv_weight_grad(g, x.data, (kh, kw), stride, padding) if weight.requires_grad else None
        gb = g.sum(axis=(0, 2, 3)) if bias is not None and bias.requires_grad else None
        return gx, gw, gb

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor._from_op(out, parents, bw, "transposed_conv2d")


def leaky_relu(x: Tensor, slope: float = 0.1) -> Tensor:
    if not 0.0 <= slope < 1.0:
        raise ValueError(f"leaky_relu slope must lie in [0, 1), got {slope}")
    x = as_tensor(x)
    scale = np.where(x.data > 0, 1.0, slope).astype(x.dtype)

    def bw(g):
        return (g * scale,)

    return Tensor._from_op(x.data * scale, (x,), bw, "leaky_relu")


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 4 or b.ndim != 4:
        raise ShapeError(f"concat_channels: expected rank-4 inputs, got {a.shape} and {b.shape}")
    for axis, name in ((0, "batch"), (2, "height"), (3, "width")):
        if a.shape[axis] != b.shape[axis]:
            raise ShapeError(
                f"concat_channels: {name} axis (dim {axis}) differs: {a.shape[axis]} vs {b.shape[axis]}"
            )
    return concat([a, b], axis=1)


def _sigmoid_diff(z: Tensor) -> Tensor:
    # e^a / (e^a + e^b) with max(a, b) subtracted, expressed through z = a - b
    d = z.data
    e = np.exp(-np.abs(d))
    out = np.where(d >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(z.dtype)

    def bw(g):
        return (g * out * (1.0 - out),)

    return Tensor._from_op(out, (z,), bw, "softmax_pair")


def softmax_pair(a: Tensor, b: Tensor) -> tuple[Tensor, Tensor]:
    """Elementwise two-way softmax ``(e^a, e^b) / (e^a + e^b)``."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"softmax_pair: shapes differ {a.shape} vs {b.shape}")
    return _sigmoid_diff(sub(a, b)), _sigmoid_diff(sub(b, a))


def l1_loss(pred: Tensor, target) -> Tensor:
    """Mean absolute error; the subgradient at a tie is 0."""
    pred, target = as_tensor(pred), as_tensor(target)
    if pred.shape != target.shape:
        raise ShapeError(f"l1_loss: shapes differ {pred.shape} vs {target.shape}")
    return mean(tabs(sub(pred, target)))


def resample2d(x: Tensor, rows: np.ndarray, cols: np.ndarray) -> Tensor:
    """Separable linear resampling ``rows @ x @ cols.T`` over the last two axes."""
    x = as_tensor(x)
    rows = rows.astype(x.dtype)
    cols = cols.astype(x.dtype)
    out = np.ascontiguousarray(np.einsum("ij,...jk,lk->...il", rows, x.data, cols, optimize=True))

    def bw(g):
        return (np.ascontiguousarray(np.einsum("ij,...il,lk->...jk", rows, g, cols, optimize=True)),)

    return Tensor._from_op(out, (x,), bw, "resample2d")


__all__ = [
    "ShapeError",
    "conv2d",
    "transposed_conv2d",
    "leaky_relu",
    "concat_channels",
    "softmax_pair",
    "l1_loss",
    "resample2d",
    "conv_forward",
    "conv_input_grad",
    "conv_weight_grad",
    "concat",
]
