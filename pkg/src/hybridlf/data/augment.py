"""Geometric augmentation that keeps the cross-view correspondence intact.

A spatial flip or rotation must be paired with the matching angular flip or
rotation; transforming each view on its own reverses the apparent parallax.
"""

from __future__ import annotations

import numpy as np

from .lightfield import LightField


def _luma(lf) -> np.ndarray:
    return lf.luma if isinstance(lf, LightField) else np.asarray(lf)


def flip_aug(lf, axis: str):
    """Flip spatial ``y`` together with angular ``t`` (axis="y"), or ``x`` with ``s`` (axis="x")."""
    arr = _luma(lf)
    if axis == "y":
        out = arr[:, ::-1, ::-1, :]
    elif axis == "x":
        out = arr[::-1, :, :, ::-1]
    else:
        raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")
    out = np.ascontiguousarray(out)
    return LightField(out) if isinstance(lf, LightField) else out


def rotate_aug(lf):
    """Rotate every view by 90 degrees and the view grid with it: [M,N,H,W] -> [N,M,W,H].

    ``out[s', t', y', x'] = in[t', N-1-s', H-1-x', y']``.
    """
    arr = _luma(lf)
    out = np.ascontiguousarray(arr.transpose(1, 0, 3, 2)[::-1, :, :, ::-1])
    return LightField(out) if isinstance(lf, LightField) else out


def naive_flip(lf, axis: str):
    """Per-view spatial flip without the angular counterpart (breaks the LF structure)."""
    arr = _luma(lf)
    if axis == "y":
        out = arr[:, :, ::-1, :]
    elif axis == "x":
        out = arr[:, :, :, ::-1]
    else:
        raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")
    out = np.ascontiguousarray(out)
    return LightField(out) if isinstance(lf, LightField) else out


def random_augment(arrays, rng: np.random.Generator, p: float = 0.5, rotate: bool = True):
    """Apply the same random flips/rotation to each 4-D array in ``arrays``.

    One draw is made per transform whether or not ``rotate`` is set, so the
    random stream does not depend on it.
    """
    arrays = list(arrays)
    if rng.random() < p:
        arrays = [flip_aug(a, "x") for a in arrays]
    if rng.random() < p:
        arrays = [flip_aug(a, "y") for a in arrays]
    if rng.random() < p and rotate:
        arrays = [rotate_aug(a) for a in arrays]
    return arrays
