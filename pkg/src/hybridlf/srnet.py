"""Cascaded-hourglass super-resolution network.

The up-sampling branch runs spatial-angular separable convolutions over the
LR light field and doubles its resolution ``log2(scale)`` times. At every
level a residual is predicted from the upsampled LF features concatenated with
features of the HR central view taken from the matching level of the
down-sampling branch. The last level also emits an attention map through a
layer parallel to the residual output.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .autodiff import ParameterSet, Tensor, as_tensor, broadcast_to, concat_channels, leaky_relu, resample2d
from .autodiff.tensor import reshape
from .data.resample import resample_matrix
from .layers import OUTPUT_GAIN, add_conv, add_upsampler, conv, conv_act, upsample


@dataclass(frozen=True)
class SrNetConfig:
    scale: int = 2
    channels: int = 16
    sas_blocks_per_level: int = 2
    hr_branch_convs: int = 2
    slope: float = 0.1

    def __post_init__(self):
        if self.scale < 2 or self.scale & (self.scale - 1):
            raise ValueError(f"scale must be a power of two >= 2, got {self.scale}")
        if self.hr_branch_convs < 1:
            raise ValueError("hr_branch_convs must be >= 1")

    @property
    def levels(self) -> int:
        return int(np.log2(self.scale))


@dataclass
class SrNetOutput:
    lf: Tensor  # [M, N, aH, aW]
    attention: Tensor  # [M, N, aH, aW], unconstrained sign


def build_srnet_params(config: SrNetConfig, rng: np.random.Generator) -> ParameterSet:
    p = ParameterSet("srnet.")
    C = config.channels
    add_conv(p, "feat", 1, C, 3, rng)
    for k in range(config.levels):
        for b in range(config.sas_blocks_per_level):
            add_conv(p, f"level{k}.sas{b}.spatial", C, C, 3, rng)
            add_conv(p, f"level{k}.sas{b}.angular", C, C, 3, rng)
        add_upsampler(p, f"level{k}.up_feat", C)
        add_upsampler(p, f"level{k}.up_img", 1, init="bicubic")
        add_conv(p, f"level{k}.head", 2 * C, C, 3, rng)
        add_conv(p, f"level{k}.residual", C, 1, 3, rng, gain=OUTPUT_GAIN)
    add_conv(p, "attention", C, 1, 3, rng, gain=OUTPUT_GAIN)
    for k in range(config.levels):
        for i in range(config.hr_branch_convs):
            add_conv(p, f"hr{k}.conv{i}", 1 if i == 0 else C, C, 3, rng)
    return p


def sas_conv(features: Tensor, params: ParameterSet, name: str, views: tuple[int, int],
             slope: float | None = 0.1) -> Tensor:
    """Spatial 3x3 conv over [M*N, C, h, w], then angular 3x3 conv over [h*w, C, M, N].

    ``slope=None`` skips both activations.
    """
    M, N = views
    V, C, h, w = features.shape
    if V != M * N:
        raise ValueError(f"sas_conv: batch axis has {V} entries, expected {M}x{N} views")
    x = conv(params, f"{name}.spatial", features)
    if slope is not None:
        x = leaky_relu(x, slope)
    x = reshape(x, (M, N, C, h, w)).transpose(3, 4, 2, 0, 1).reshape(h * w, C, M, N)
    x = conv(params, f"{name}.angular", x)
    if slope is not None:
        x = leaky_relu(x, slope)
    return reshape(x, (h, w, C, M, N)).transpose(3, 4, 2, 0, 1).reshape(V, C, h, w)


def hr_feature_pyramid(center: Tensor, config: SrNetConfig, params: ParameterSet) -> list[Tensor]:
    """Features of the HR view at sizes ``2^-k * (aH, aW)`` for ``k = 0 .. levels-1``."""
    center = as_tensor(center)
    H, W = center.shape
    step = 2 ** (config.levels - 1)
    if H % step or W % step:
        raise ValueError(f"HR view {H}x{W} not divisible by {step} for {config.levels} levels")
    image = reshape(center, (1, 1, H, W))
    pyramid = []
    for k in range(config.levels):
        x = image
        if k:
            factor = Fraction(1, 2**k)
            x = resample2d(image, resample_matrix(H, factor), resample_matrix(W, factor))
        for i in range(config.hr_branch_convs):
            x = conv_act(params, f"hr{k}.conv{i}", x, config.slope)
        pyramid.append(x)
    return pyramid


def sr_level_forward(features: Tensor, image: Tensor, hr_features: Tensor, params: ParameterSet,
                     level: int, config: SrNetConfig, views: tuple[int, int]):
    """One 2x level. Returns (upsampled features, refined image, head features)."""
    for b in range(config.sas_blocks_per_level):
        features = sas_conv(features, params, f"level{level}.sas{b}", views, config.slope)
    up = leaky_relu(upsample(params, f"level{level}.up_feat", features), config.slope)
    V, C, h2, w2 = up.shape
    if hr_features.shape[2:] != (h2, w2):
        raise ValueError(f"HR features {hr_features.shape[2:]} do not match upsampled LF features {(h2, w2)}")
    hr = broadcast_to(hr_features, (V,) + hr_features.shape[1:])
    head = conv_act(params, f"level{level}.head", concat_channels(up, hr), config.slope)
    residual = conv(params, f"level{level}.residual", head)
    refined = upsample(params, f"level{level}.up_img", image) + residual
    return up, refined, head


def sr_forward(lr_lf, center, config: SrNetConfig, params: ParameterSet) -> SrNetOutput:
    lr_lf, center = as_tensor(lr_lf), as_tensor(center)
    M, N, h, w = lr_lf.shape
    views = (M, N)
    image = reshape(lr_lf, (M * N, 1, h, w))
    pyramid = hr_feature_pyramid(center, config, params)
    features = conv_act(params, "feat", image, config.slope)
    head = None
    for k in range(config.levels):
        # coarse-to-fine: up-branch level k pairs with HR-branch level (levels - 1 - k)
        features, image, head = sr_level_forward(
            features, image, pyramid[config.levels - 1 - k], params, k, config, views
        )
    attention = conv(params, "attention", head)
    H, W = image.shape[2:]
    return SrNetOutput(lf=reshape(image, (M, N, H, W)), attention=reshape(attention, (M, N, H, W)))


class SrNet:
    def __init__(self, config: SrNetConfig, seed: int = 0):
        self.config = config
        self.params = build_srnet_params(config, np.random.default_rng(seed))

    def __call__(self, lr_lf, center) -> SrNetOutput:
        return sr_forward(lr_lf, center, self.config, self.params)
