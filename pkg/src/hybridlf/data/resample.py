"""Keys bicubic kernel (a = -0.5): image resampling and point sampling."""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache

import numpy as np

A = -0.5


def keys_kernel(t, a: float = A) -> np.ndarray:
    t = np.abs(np.asarray(t, dtype=np.float64))
    near = (a + 2) * t**3 - (a + 3) * t**2 + 1
    far = a * t**3 - 5 * a * t**2 + 8 * a * t - 4 * a
    return np.where(t <= 1, near, np.where(t < 2, far, 0.0))


def _keys_deriv(t, a: float = A) -> np.ndarray:
    # derivative for t >= 0
    near = 3 * (a + 2) * t**2 - 2 * (a + 3) * t
    far = 3 * a * t**2 - 10 * a * t + 8 * a
    return np.where(t <= 1, near, np.where(t < 2, far, 0.0))


def cubic_taps(coord: np.ndarray, n: int):
    """Tap indices, weights and d(weight)/d(coord) for sampling along an axis of length ``n``.

    Coordinates are clamped to ``[0, n-1]``; ``inside`` flags entries that were
    not clamped (their coordinate gradient is the derivative of the weights).
    """
    coord = np.asarray(coord)
    clamped = np.clip(coord, 0.0, n - 1.0)
    inside = (coord >= 0.0) & (coord <= n - 1.0)
    base = np.floor(clamped)
    f = (clamped - base)[..., None]
    offsets = np.array([-1.0, 0.0, 1.0, 2.0])
    dist = f - offsets  # distance from sample point to each tap
    weights = keys_kernel(dist)
    # d/dcoord keys(|f - o|) = sign(f - o) * keys'(|f - o|)
    dweights = np.sign(dist) * _keys_deriv(np.abs(dist))
    idx = np.clip(base[..., None].astype(np.int64) + offsets.astype(np.int64), 0, n - 1)
    return idx, weights, dweights, inside


def _gather_sum(flat: np.ndarray, base, ix, wx, iy, wy, W: int) -> np.ndarray:
    out = np.zeros(wx.shape[:-1])
    for i in range(4):
        row = base + iy[..., i] * W
        acc = np.zeros_like(out)
        for j in range(4):
            acc += wx[..., j] * flat[row + ix[..., j]]
        out += wy[..., i] * acc
    return out


def bicubic_sample(image: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Sample a 2-D ``image`` at coordinates ``(x, y)`` (x indexes columns)."""
    H, W = image.shape
    ix, wx, _, _ = cubic_taps(np.asarray(x, dtype=np.float64), W)
    iy, wy, _, _ = cubic_taps(np.asarray(y, dtype=np.float64), H)
    return _gather_sum(np.asarray(image).reshape(-1), 0, ix, wx, iy, wy, W)


def bicubic_sample_stack(images: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Sample ``images[k]`` at ``(x[k], y[k])`` for every leading index ``k``."""
    K, H, W = images.shape
    ix, wx, _, _ = cubic_taps(np.asarray(x, dtype=np.float64), W)
    iy, wy, _, _ = cubic_taps(np.asarray(y, dtype=np.float64), H)
    base = (np.arange(K) * H * W).reshape((K,) + (1,) * (np.ndim(x) - 1))
    return _gather_sum(np.asarray(images).reshape(-1), base, ix, wx, iy, wy, W)


def _as_fraction(scale) -> Fraction:
    return Fraction(scale).limit_denominator(1000)


@lru_cache(maxsize=64)
def _matrix(n_in: int, n_out: int, scale: Fraction) -> np.ndarray:
    dst = np.arange(n_out, dtype=np.float64)
    src = (dst + 0.5) / float(scale) - 0.5
    # clamped taps fold onto edge pixels; do not clamp the sample point itself
    base = np.floor(src)
    f = (src - base)[:, None]
    w = keys_kernel(f - np.array([-1.0, 0.0, 1.0, 2.0]))
    idx = np.clip(base[:, None].astype(np.int64) + np.array([-1, 0, 1, 2]), 0, n_in - 1)
    mat = np.zeros((n_out, n_in))
    np.add.at(mat, (np.repeat(np.arange(n_out), 4), idx.reshape(-1)), w.reshape(-1))
    mat.setflags(write=False)
    return mat


def resample_matrix(n_in: int, scale) -> np.ndarray:
    """Dense [n_out, n_in] bicubic resampling matrix for one axis."""
    scale = _as_fraction(scale)
    if scale <= 0:
        raise ValueError(f"scale must be positive, got {scale}")
    n_out = n_in * scale
    if n_out.denominator != 1:
        raise ValueError(f"length {n_in} times scale {scale} is not an integer")
    return _matrix(n_in, int(n_out), scale)


def bicubic_resample(image: np.ndarray, scale) -> np.ndarray:
    """Resize the last two axes of ``image`` by ``scale``.

    Source coordinates follow ``src = (dst + 0.5) / scale - 0.5``; samples
    falling off the edge are clamped to the border pixel. No anti-alias
    prefilter is applied when downscaling.
    """
    image = np.asarray(image, dtype=np.float64)
    rows = resample_matrix(image.shape[-2], scale)
    cols = resample_matrix(image.shape[-1], scale)
    # per-view matmuls keep a stacked call bitwise equal to single-image calls
    return (rows @ image) @ cols.T
