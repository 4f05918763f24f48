"""Disparity estimation from view stacks and inverse warping of the HR view.

Horizontal stacks hold the views of one view column ``t`` (varying ``s``, the
angular axis paired with ``x``) as channels; vertical stacks hold one view row
``s``. One trunk per orientation is shared by all stacks of that orientation
and predicts a disparity and an attention value for every view in the stack.
The two estimates are merged by a 1x1 conv, upsampled by learned transposed
convs and used to inverse-warp the HR central view to every viewpoint.

Sign convention: view ``(s, t)`` at ``(x, y)`` samples the central view at
``(x + D*(s_c - s), y + D*(t_c - t))``, the same relation that
:func:`hybridlf.data.structure_check` tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import ParameterSet, Tensor, as_tensor, clip, concat_channels
from .autodiff.tensor import reshape
from .data.lightfield import HybridInput, central_view_index
from .data.resample import cubic_taps
from .layers import OUTPUT_GAIN, add_conv, add_upsampler, conv, conv_act, upsample


@dataclass(frozen=True)
class WarpNetConfig:
    scale: int = 2
    channels: int = 16
    stack_convs: int = 5
    d_max: float = 4.0  # LR px per angular step
    slope: float = 0.1

    def __post_init__(self):
        if self.scale < 2 or self.scale & (self.scale - 1):
            raise ValueError(f"scale must be a power of two >= 2, got {self.scale}")
        if self.stack_convs < 1:
            raise ValueError("stack_convs must be >= 1")

    @property
    def stages(self) -> int:
        return int(np.log2(self.scale))


@dataclass
class WarpNetOutput:
    lf: Tensor  # [M, N, aH, aW]
    attention: Tensor  # [M, N, aH, aW]
    disparity: Tensor  # [M, N, aH, aW], HR px per angular step


# -- stacks -------------------------------------------------------------------


def build_stacks(lf):
    """Return (horizontal [N, M, h, w], vertical [M, N, h, w]) stack batches.

    Horizontal stack ``t`` is ``lf[:, t]``; vertical stack ``s`` is ``lf[s]``.
    Works on arrays and Tensors.
    """
    if isinstance(lf, Tensor):
        return lf.transpose(1, 0, 2, 3), lf
    lf = np.asarray(getattr(lf, "luma", lf))
    return lf.transpose(1, 0, 2, 3), lf


def unstack(horizontal=None, vertical=None):
    """Invert :func:`build_stacks` from either orientation."""
    if horizontal is not None:
        return horizontal.transpose(1, 0, 2, 3)
    if vertical is None:
        raise ValueError("unstack needs at least one stack batch")
    return vertical


def _add_trunk(p: ParameterSet, name: str, views: int, config: WarpNetConfig, rng) -> None:
    c_in = views
    for i in range(config.stack_convs - 1):
        add_conv(p, f"{name}.conv{i}", c_in, config.channels, 3, rng)
        c_in = config.channels
    add_conv(p, f"{name}.disparity", c_in, views, 3, rng, gain=OUTPUT_GAIN)
    add_conv(p, f"{name}.attention", c_in, views, 3, rng, gain=OUTPUT_GAIN)


def _add_merge(p: ParameterSet, name: str) -> None:
    p.add(f"{name}.weight", np.full((1, 2, 1, 1), 0.5, np.float32))


def build_warpnet_params(config: WarpNetConfig, views: tuple[int, int], rng: np.random.Generator) -> ParameterSet:
    M, N = views
    p = ParameterSet("warpnet.")
    _add_trunk(p, "horizontal", M, config, rng)
    _add_trunk(p, "vertical", N, config, rng)
    _add_merge(p, "merge")
    _add_merge(p, "attention_merge")
    for k in range(config.stages):
        # the x2 value gain converts LR-pixel disparities to the finer grid
        add_upsampler(p, f"disparity_up{k}", 1, value_gain=2.0)
        add_upsampler(p, f"attention_up{k}", 1)
    return p


def stack_features(stacks: Tensor, params: ParameterSet, name: str, config: WarpNetConfig):
    """Shared trunk over a batch of stacks [B, K, h, w] -> (disparity, attention), both [B, K, h, w]."""
    x = as_tensor(stacks)
    for i in range(config.stack_convs - 1):
        x = conv_act(params, f"{name}.conv{i}", x, config.slope)
    return conv(params, f"{name}.disparity", x), conv(params, f"{name}.attention", x)


def merge_hv(d_h: Tensor, d_v: Tensor, params: ParameterSet, name: str = "merge") -> Tensor:
    """``w1*D_h + w2*D_v`` via a bias-free 1x1 conv over the pair; [M, N, h, w] in and out."""
    d_h, d_v = as_tensor(d_h), as_tensor(d_v)
    if d_h.shape != d_v.shape:
        raise ValueError(f"merge_hv: shapes differ {d_h.shape} vs {d_v.shape}")
    M, N, h, w = d_h.shape
    pair = concat_channels(reshape(d_h, (M * N, 1, h, w)), reshape(d_v, (M * N, 1, h, w)))
    return reshape(conv(params, name, pair), (M, N, h, w))


def _upsample_views(x: Tensor, params: ParameterSet, name: str, stages: int) -> Tensor:
    M, N, h, w = x.shape
    y = reshape(x, (M * N, 1, h, w))
    for k in range(stages):
        y = upsample(params, f"{name}{k}", y)
    return reshape(y, (M, N) + y.shape[2:])


def upsample_disparity(d_low: Tensor, params: ParameterSet, config: WarpNetConfig) -> Tensor:
    """LR disparity [M, N, h, w] -> HR disparity [M, N, ah, aw] in HR px, clamped to +-d_max*a."""
    d_high = _upsample_views(as_tensor(d_low), params, "disparity_up", config.stages)
    bound = config.d_max * config.scale
    return clip(d_high, -bound, bound)


# -- differentiable sampling ----------------------------------------------------


def _sample_xy(image: Tensor, x: Tensor, y: Tensor) -> Tensor:
    H, W = image.shape
    xd, yd = x.data.astype(np.float64), y.data.astype(np.float64)
    ix, wx, dwx, in_x = cubic_taps(xd, W)
    iy, wy, dwy, in_y = cubic_taps(yd, H)
    flat = image.data.reshape(-1).astype(np.float64)
    out = np.zeros(xd.shape)
    d_dx = np.zeros(xd.shape)
    d_dy = np.zeros(xd.shape)
    for i in range(4):
        row = iy[..., i] * W
        along = np.zeros(xd.shape)
        along_dx = np.zeros(xd.shape)
        for j in range(4):
            v = flat[row + ix[..., j]]
            along += wx[..., j] * v
            along_dx += dwx[..., j] * v
        out += wy[..., i] * along
        d_dx += wy[..., i] * along_dx
        d_dy += dwy[..., i] * along
    # clamped coordinates sit on a constant extension of the border
    d_dx *= in_x
    d_dy *= in_y
    dtype = image.dtype

    def bw(g):
        g = g.astype(np.float64)
        g_img = None
        if image.requires_grad:
            idx = (iy[..., :, None] * W + ix[..., None, :]).reshape(-1)
            wts = (g[..., None, None] * wy[..., :, None] * wx[..., None, :]).reshape(-1)
            g_img = np.bincount(idx, weights=wts, minlength=H * W).reshape(H, W).astype(dtype)
        return g_img, (g * d_dx).astype(x.dtype), (g * d_dy).astype(y.dtype)

    return Tensor._from_op(out.astype(dtype), (image, x, y), bw, "bicubic_sample")


def bicubic_sample_diff(image, coords) -> Tensor:
    """Keys bicubic sampling of ``image [H, W]`` at ``coords [..., 2]`` holding ``(x, y)``.

    Differentiable with respect to the image values and the coordinates.
    Coordinates outside the image are clamped to the border (replicate).
    """
    image, coords = as_tensor(image), as_tensor(coords)
    if image.ndim != 2:
        raise ValueError(f"bicubic_sample_diff expects a 2-D image, got shape {image.shape}")
    if coords.shape[-1:] != (2,):
        raise ValueError(f"coords must end in an axis of size 2, got shape {coords.shape}")
    return _sample_xy(image, coords[..., 0], coords[..., 1])


def inverse_warp(center, disparity) -> Tensor:
    """Warp the HR view ``center [H, W]`` to every view using ``disparity [M, N, H, W]``."""
    center, disparity = as_tensor(center), as_tensor(disparity)
    M, N, H, W = disparity.shape
    if center.shape != (H, W):
        raise ValueError(f"center view {center.shape} does not match disparity {disparity.shape}")
    sc, tc = central_view_index(M, N)
    ds = (sc - np.arange(M, dtype=np.float64)).reshape(M, 1, 1, 1)
    dt = (tc - np.arange(N, dtype=np.float64)).reshape(1, N, 1, 1)
    xs = np.arange(W, dtype=np.float64).reshape(1, 1, 1, W)
    ys = np.arange(H, dtype=np.float64).reshape(1, 1, H, 1)
    x = disparity * ds + xs
    y = disparity * dt + ys
    return _sample_xy(center, x, y)


# -- network ------------------------------------------------------------------


def warp_forward(lr_lf, center, config: WarpNetConfig, params: ParameterSet) -> WarpNetOutput:
    """LR light field [M, N, h, w] and HR view [ah, aw] -> warped HR light field, attention and D^h."""
    lr_lf, center = as_tensor(lr_lf), as_tensor(center)
    M, N, h, w = lr_lf.shape
    if center.shape != (h * config.scale, w * config.scale):
        raise ValueError(f"center view {center.shape} is not {config.scale}x the LR views {(h, w)}")
    horizontal, vertical = build_stacks(lr_lf)
    d_h, a_h = stack_features(horizontal, params, "horizontal", config)
    d_v, a_v = stack_features(vertical, params, "vertical", config)
    d_low = merge_hv(unstack(horizontal=d_h), d_v, params, "merge")
    a_low = merge_hv(unstack(horizontal=a_h), a_v, params, "attention_merge")
    disparity = upsample_disparity(d_low, params, config)
    attention = _upsample_views(a_low, params, "attention_up", config.stages)
    return WarpNetOutput(lf=inverse_warp(center, disparity), attention=attention, disparity=disparity)


class WarpNet:
    def __init__(self, config: WarpNetConfig, views: tuple[int, int], seed: int = 0):
        self.config = config
        self.params = build_warpnet_params(config, views, np.random.default_rng(seed))

    def __call__(self, lr_lf, center) -> WarpNetOutput:
        return warp_forward(lr_lf, center, self.config, self.params)


def warp_hybrid(hybrid: HybridInput, config: WarpNetConfig, params: ParameterSet) -> WarpNetOutput:
    return warp_forward(hybrid.lr_lf.luma, hybrid.center, config, params)
