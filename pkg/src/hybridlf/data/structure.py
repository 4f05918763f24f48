"""Cross-view consistency check and epipolar-plane images."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lightfield import Epi, LightField
from .resample import bicubic_sample_stack, cubic_taps


@dataclass
class StructureReport:
    max_error: float
    mean_error: float
    passed: bool
    samples: int


def structure_check(lf, disparity, tol: float = 1e-3, mask: np.ndarray | None = None, margin: int = 1) -> StructureReport:
    """Test ``L(x, y, s, t) == L(x + d*ds, y + d*dt, s + ds, t + dt)`` over all view pairs.

    ``disparity`` is a scalar or a [M,N,H,W] field giving ``d`` at the source
    pixel. The target view is sampled bicubically; pairs whose reprojection
    falls within ``margin`` pixels of the border (where the kernel would
    clamp) are skipped, as are source pixels where ``mask`` is False.
    With a disparity field, a sample is also skipped when any of the 4x4
    target pixels feeding the bicubic kernel carries a different disparity:
    the point is hidden there, or the kernel straddles a depth edge, and
    the relation does not apply. Passes iff the mean absolute error is below
    ``tol``.
    """
    luma = lf.luma if isinstance(lf, LightField) else np.asarray(lf, dtype=np.float64)
    M, N, H, W = luma.shape
    views = luma.reshape(M * N, H, W)
    field = np.broadcast_to(np.asarray(disparity, dtype=np.float64), luma.shape)
    layered = np.ndim(disparity) > 0 and np.ptp(field) > 0
    field_views = np.ascontiguousarray(field).reshape(-1)
    keep_src = np.ones(luma.shape, bool) if mask is None else np.broadcast_to(mask, luma.shape)
    ss, tt = np.meshgrid(np.arange(M), np.arange(N), indexing="ij")
    ss, tt = ss.reshape(-1), tt.reshape(-1)
    ys, xs = np.meshgrid(np.arange(H, dtype=np.float64), np.arange(W, dtype=np.float64), indexing="ij")

    total, count, worst = 0.0, 0, 0.0
    for s in range(M):
        for t in range(N):
            others = np.flatnonzero((ss != s) | (tt != t))
            if others.size == 0:
                continue
            ds = (ss[others] - s)[:, None, None]
            dt = (tt[others] - t)[:, None, None]
            d = field[s, t]
            x = xs + d * ds
            y = ys + d * dt
            valid = (x >= margin) & (x <= W - 1 - margin) & (y >= margin) & (y <= H - 1 - margin)
            valid &= keep_src[s, t][None]
            if layered:
                valid &= _same_depth(field_views, others, x, y, d, H, W)
            if not valid.any():
                continue
            sampled = bicubic_sample_stack(views[others], x, y)
            err = np.abs(sampled - luma[s, t][None])[valid]
            total += float(err.sum())
            count += err.size
            worst = max(worst, float(err.max()))
    mean_error = total / count if count else 0.0
    return StructureReport(max_error=worst, mean_error=mean_error, passed=mean_error < tol, samples=count)


def _same_depth(field_flat: np.ndarray, views: np.ndarray, x, y, d, H: int, W: int) -> np.ndarray:
    """True where every bicubic tap of the target view has disparity ``d``."""
    ix = cubic_taps(x, W)[0]
    iy = cubic_taps(y, H)[0]
    base = (views * H * W).reshape(-1, 1, 1)
    ok = np.ones(x.shape, bool)
    for i in range(4):
        row = base + iy[..., i] * W
        for j in range(4):
            ok &= np.abs(field_flat[row + ix[..., j]] - d) < 1e-9
    return ok


def extract_epi(lf, orientation: str, fixed_angular: int, fixed_spatial: int) -> Epi:
    """Horizontal EPI: fix view row ``t`` and pixel row ``y``, giving [M, W] over (s, x).

    Vertical EPI: fix view column ``s`` and pixel column ``x``, giving [N, H] over (t, y).
    """
    luma = lf.luma if isinstance(lf, LightField) else np.asarray(lf)
    M, N, H, W = luma.shape
    if orientation == "horizontal":
        if not (0 <= fixed_angular < N and 0 <= fixed_spatial < H):
            raise IndexError(f"horizontal EPI needs 0 <= t < {N} and 0 <= y < {H}, got t={fixed_angular}, y={fixed_spatial}")
        image = luma[:, fixed_angular, fixed_spatial, :]
    elif orientation == "vertical":
        if not (0 <= fixed_angular < M and 0 <= fixed_spatial < W):
            raise IndexError(f"vertical EPI needs 0 <= s < {M} and 0 <= x < {W}, got s={fixed_angular}, x={fixed_spatial}")
        image = luma[fixed_angular, :, :, fixed_spatial]
    else:
        raise ValueError(f"orientation must be 'horizontal' or 'vertical', got {orientation!r}")
    return Epi(orientation=orientation, image=np.ascontiguousarray(image))


def all_epis(luma: np.ndarray):
    """Yield every horizontal then every vertical EPI of a [M,N,H,W] array."""
    M, N, H, W = luma.shape
    for t in range(N):
        for y in range(H):
            yield luma[:, t, y, :]
    for s in range(M):
        for x in range(W):
            yield luma[s, :, :, x]
