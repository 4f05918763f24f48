"""Light-field containers.

Arrays are indexed ``[s, t, y, x]`` with 0-based indices: ``s`` runs over the
``views_s`` (M) horizontal view positions, ``t`` over the ``views_t`` (N)
vertical ones.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .resample import bicubic_resample

LUMA_COEFFS = (0.299, 0.587, 0.114)


@dataclass(frozen=True, eq=False)
class LightField:
    luma: np.ndarray

    def __post_init__(self):
        arr = np.array(self.luma, dtype=np.float64)  # private copy, frozen below
        if arr.ndim != 4:
            raise ValueError(f"light field must be 4-D [M,N,H,W], got shape {arr.shape}")
        if min(arr.shape) < 1:
            raise ValueError(f"light field dimensions must be >= 1, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("light field contains non-finite values")
        arr.setflags(write=False)
        object.__setattr__(self, "luma", arr)

    @property
    def views_s(self) -> int:
        return self.luma.shape[0]

    @property
    def views_t(self) -> int:
        return self.luma.shape[1]

    @property
    def height(self) -> int:
        return self.luma.shape[2]

    @property
    def width(self) -> int:
        return self.luma.shape[3]

    @property
    def shape(self) -> tuple:
        return self.luma.shape

    @property
    def center_index(self) -> tuple[int, int]:
        return central_view_index(self.views_s, self.views_t)

    def view(self, s: int, t: int) -> np.ndarray:
        return self.luma[s, t]

    def center_view(self) -> np.ndarray:
        s, t = self.center_index
        return self.luma[s, t]

    def clamped(self) -> "LightField":
        return LightField(np.clip(self.luma, 0.0, 1.0))


def central_view_index(M: int, N: int) -> tuple[int, int]:
    if M % 2 == 0 or N % 2 == 0:
        raise ValueError(f"central view undefined for an even angular grid {M}x{N}")
    return (M - 1) // 2, (N - 1) // 2


@dataclass(frozen=True, eq=False)
class HybridInput:
    """HR central view plus the LR light field whose central view is its downscale."""

    center: np.ndarray
    lr_lf: LightField
    scale: int

    def __post_init__(self):
        if self.scale < 2 or self.scale & (self.scale - 1):
            raise ValueError(f"scale must be a power of two >= 2, got {self.scale}")
        center = np.array(self.center, dtype=np.float64)
        expected = (self.lr_lf.height * self.scale, self.lr_lf.width * self.scale)
        if center.shape != expected:
            raise ValueError(f"center view shape {center.shape} != {expected} for scale {self.scale}")
        center.setflags(write=False)
        object.__setattr__(self, "center", center)

    @property
    def angular(self) -> tuple[int, int]:
        return self.lr_lf.views_s, self.lr_lf.views_t


@dataclass(frozen=True)
class Epi:
    orientation: str
    image: np.ndarray


def rgb_to_y(rgb: np.ndarray) -> np.ndarray:
    """BT.601 full-range luma of an ``[..., 3]`` image."""
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.shape[-1] != 3:
        raise ValueError(f"expected a trailing RGB axis of size 3, got shape {rgb.shape}")
    r, g, b = LUMA_COEFFS
    return r * rgb[..., 0] + g * rgb[..., 1] + b * rgb[..., 2]


def downscale_lf(lf: LightField, scale: int) -> LightField:
    return LightField(bicubic_resample(lf.luma, Fraction(1, scale)))


def simulate_hybrid(hr_lf: LightField, scale: int) -> tuple[HybridInput, LightField]:
    """Keep the HR central view and bicubic-downscale every view to form the LR light field."""
    M, N = hr_lf.views_s, hr_lf.views_t
    sc, tc = central_view_index(M, N)
    if hr_lf.height % scale or hr_lf.width % scale:
        raise ValueError(f"HR size {hr_lf.height}x{hr_lf.width} not divisible by scale {scale}")
    hybrid = HybridInput(center=hr_lf.luma[sc, tc], lr_lf=downscale_lf(hr_lf, scale), scale=scale)
    return hybrid, hr_lf
