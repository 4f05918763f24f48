"""Parameter initialisation and thin conv-layer wrappers shared by both networks."""

from __future__ import annotations

import numpy as np

from .autodiff import ParameterSet, Tensor, conv2d, leaky_relu, transposed_conv2d
from .data.resample import keys_kernel

# output layers start near zero so the untrained networks reduce to their skip paths
OUTPUT_GAIN = 0.1


def fan_in_uniform(rng: np.random.Generator, shape, gain: float = 1.0) -> np.ndarray:
    fan_in = int(np.prod(shape[1:]))
    bound = gain * np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(np.float32)


def bilinear_kernel(k: int = 4) -> np.ndarray:
    factor = (k + 1) // 2
    center = factor - 1 if k % 2 == 1 else factor - 0.5
    og = np.arange(k)
    w1 = 1.0 - np.abs(og - center) / factor
    return np.outer(w1, w1).astype(np.float32)


def add_conv(params: ParameterSet, name: str, c_in: int, c_out: int, k: int, rng, gain: float = 1.0, bias: bool = True) -> None:
    params.add(f"{name}.weight", fan_in_uniform(rng, (c_out, c_in, k, k), gain))
    if bias:
        params.add(f"{name}.bias", np.zeros(c_out, np.float32))


def bicubic_kernel() -> np.ndarray:
    """8x8 stride-2 transposed-conv kernel that reproduces Keys bicubic x2 upsampling away from borders."""
    taps = keys_kernel(np.arange(8) / 2.0 - 1.75)
    return np.outer(taps, taps).astype(np.float32)


def add_upsampler(params: ParameterSet, name: str, channels: int, value_gain: float = 1.0, init: str = "bilinear") -> None:
    """Stride-2 transposed conv initialised to per-channel bilinear (kernel 4) or bicubic (kernel 8) upsampling."""
    if init not in ("bilinear", "bicubic"):
        raise ValueError(f"unknown upsampler init {init!r}")
    kernel = (bilinear_kernel(4) if init == "bilinear" else bicubic_kernel()) * value_gain
    k = kernel.shape[0]
    w = np.zeros((channels, channels, k, k), np.float32)
    for c in range(channels):
        w[c, c] = kernel
    params.add(f"{name}.weight", w)
    params.add(f"{name}.bias", np.zeros(channels, np.float32))


def conv(params: ParameterSet, name: str, x: Tensor) -> Tensor:
    w = params[f"{name}.weight"]
    b = params[f"{name}.bias"] if f"{name}.bias" in params else None
    return conv2d(x, w, b, stride=1, padding=w.shape[2] // 2)


def conv_act(params: ParameterSet, name: str, x: Tensor, slope: float) -> Tensor:
    return leaky_relu(conv(params, name, x), slope)


def upsample(params: ParameterSet, name: str, x: Tensor) -> Tensor:
    w = params[f"{name}.weight"]
    # padding k/2 - 1 makes the output exactly twice the input size
    return transposed_conv2d(x, w, params[f"{name}.bias"], stride=2, padding=w.shape[2] // 2 - 1)
