"""Attention-weighted fusion of the two intermediate light fields and the training losses."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, as_tensor, l1_loss, maximum, softmax_pair, sqrt, square, tsum
from .autodiff.ops import ShapeError

EPS_NORM = 1e-8
TERMS = ("lp", "lps", "lcs", "lpw", "lcw")


class TrainingError(RuntimeError):
    pass


@dataclass
class FusionOutput:
    fused: Tensor
    c_sr: Tensor  # normalized attention of the SR branch
    c_warp: Tensor
    sr_lf: Tensor
    warp_lf: Tensor
    sr_attention: Tensor  # raw attention maps, before normalization
    warp_attention: Tensor
    disparity: Tensor | None = None


def fuse(sr_out, warp_out) -> FusionOutput:
    """Per-pixel softmax over the two attention maps, then a convex blend of the two predictions."""
    if sr_out.lf.shape != warp_out.lf.shape:
        raise ShapeError(f"fuse: SR output {sr_out.lf.shape} vs warp output {warp_out.lf.shape}")
    if sr_out.attention.shape != sr_out.lf.shape or warp_out.attention.shape != warp_out.lf.shape:
        raise ShapeError("fuse: attention maps must match their predictions")
    c_sr, c_warp = softmax_pair(sr_out.attention, warp_out.attention)
    fused = sr_out.lf * c_sr + warp_out.lf * c_warp
    return FusionOutput(
        fused=fused, c_sr=c_sr, c_warp=c_warp, sr_lf=sr_out.lf, warp_lf=warp_out.lf,
        sr_attention=sr_out.attention, warp_attention=warp_out.attention,
        disparity=getattr(warp_out, "disparity", None),
    )


def attention_loss(pred, target, attention) -> Tensor:
    """``sum(e^2 * C) / (P * max(||C||_2, eps))`` with the squared error ``e^2`` held constant.

    The gradient reaches only the attention map, never the prediction.
    """
    pred_data = pred.data if isinstance(pred, Tensor) else np.asarray(pred)
    target_data = target.data if isinstance(target, Tensor) else np.asarray(target)
    attention = as_tensor(attention)
    if pred_data.shape != target_data.shape or attention.shape != pred_data.shape:
        raise ShapeError(f"attention_loss: shapes {pred_data.shape}, {target_data.shape}, {attention.shape}")
    err2 = np.square(target_data.astype(np.float64) - pred_data).astype(attention.dtype)
    norm = maximum(sqrt(tsum(square(attention))), EPS_NORM)
    return tsum(attention * err2) / (norm * float(attention.size))


def loss_terms(out: FusionOutput, target) -> dict[str, Tensor]:
    target = as_tensor(target)
    return {
        "lp": l1_loss(out.fused, target),
        "lps": l1_loss(out.sr_lf, target),
        "lcs": attention_loss(out.sr_lf, target, out.sr_attention),
        "lpw": l1_loss(out.warp_lf, target),
        "lcw": attention_loss(out.warp_lf, target, out.warp_attention),
    }


def total_loss(out: FusionOutput, target, weights=(1.0, 1.0, 1.0, 1.0, 1.0)):
    """Weighted sum of the five terms; returns (total, {term: value}).

    Raises :class:`TrainingError` naming the first non-finite term.
    """
    if len(weights) != len(TERMS) or any(w < 0 for w in weights):
        raise ValueError(f"need {len(TERMS)} non-negative loss weights, got {weights}")
    terms = loss_terms(out, target)
    values = {}
    for name, term in terms.items():
        value = float(np.asarray(term.data).reshape(-1)[0])
        if not np.isfinite(value):
            raise TrainingError(f"loss term {name} is not finite ({value})")
        values[name] = value
    total = None
    for w, name in zip(weights, TERMS):
        if w == 0:
            continue
        part = terms[name] * w if w != 1 else terms[name]
        total = part if total is None else total + part
    if total is None:
        total = terms["lp"] * 0.0
    return total, values
