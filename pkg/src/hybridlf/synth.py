"""Procedural light fields with known disparity.

Each layer is a band-limited texture (a sum of random sinusoids) evaluated
analytically at the parallax-shifted coordinate of every view, so a rendered
light field obeys ``L(x, y, s, t) = L(x + d*ds, y + d*dt, s + ds, t + dt)``
with no resampling error. Disparity is in HR pixels per unit angular step.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .data.lightfield import HybridInput, LightField, central_view_index, simulate_hybrid

MAX_SINUSOIDS = 8


@dataclass(frozen=True)
class Layer:
    disparity: float
    texture: str = "sinusoids"  # "sinusoids" | "constant"
    seed: int = 0
    level: float = 0.5
    mask: str = "full"  # "full" | "none" | "disk" | "rect"
    mask_center: tuple[float, float] = (0.0, 0.0)  # (x, y) in central-view pixels
    mask_size: float = 0.0  # disk radius or rect half-width


@dataclass(frozen=True)
class SceneSpec:
    height: int
    width: int
    views_s: int = 5
    views_t: int = 5
    layers: tuple = ()
    rng_seed: int = 0
    min_wavelength: float = 7.0
    max_wavelength: float = 40.0

    def validate(self) -> None:
        if not self.layers:
            raise ValueError("scene needs at least one layer")
        sc, tc = central_view_index(self.views_s, self.views_t)
        reach = max(sc, tc)
        bound = min(self.height, self.width) / 4
        for layer in self.layers:
            if abs(layer.disparity) * reach >= bound:
                raise ValueError(
                    f"disparity {layer.disparity} x max view offset {reach} exceeds {bound} px; "
                    "views would not overlap substantially"
                )


@dataclass
class OracleBundle:
    hr_lf: LightField
    gt_disparity: np.ndarray  # [M,N,H,W], HR px per angular step
    occlusion_mask: np.ndarray  # [M,N,H,W] bool
    spec: SceneSpec | None = field(default=None, repr=False)


class Texture:
    """Sum of up to eight sinusoids with wavelengths in ``[min_wl, max_wl]`` px."""

    def __init__(self, seed: int, level: float = 0.5, min_wl: float = 7.0, max_wl: float = 40.0, kind: str = "sinusoids"):
        self.level = level
        self.kind = kind
        rng = np.random.default_rng(seed)
        n = MAX_SINUSOIDS
        wavelength = np.exp(rng.uniform(np.log(min_wl), np.log(max_wl), n))
        angle = rng.uniform(0, np.pi, n)
        self.fx = np.cos(angle) / wavelength
        self.fy = np.sin(angle) / wavelength
        self.phase = rng.uniform(0, 2 * np.pi, n)
        amp = rng.uniform(0.3, 1.0, n)
        # keep level +- sum(amp) inside (0, 1)
        self.amp = amp / amp.sum() * min(level, 1.0 - level) * 0.9

    def __call__(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        if self.kind == "constant":
            return np.full(np.broadcast(u, v).shape, self.level)
        arg = 2 * np.pi * (u[..., None] * self.fx + v[..., None] * self.fy) + self.phase
        return self.level + np.sum(self.amp * np.cos(arg), axis=-1)


def _texture(layer: Layer, spec: SceneSpec) -> Texture:
    return Texture(layer.seed, layer.level, spec.min_wavelength, spec.max_wavelength, layer.texture)


def _mask(layer: Layer, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    cx, cy = layer.mask_center
    if layer.mask == "full":
        return np.ones(u.shape, bool)
    if layer.mask == "none":
        return np.zeros(u.shape, bool)
    if layer.mask == "disk":
        return (u - cx) ** 2 + (v - cy) ** 2 < layer.mask_size**2
    if layer.mask == "rect":
        return (np.abs(u - cx) < layer.mask_size) & (np.abs(v - cy) < layer.mask_size)
    raise ValueError(f"unknown mask shape {layer.mask!r}")


def _view_coords(spec: SceneSpec):
    """Per-view angular offsets to the central view and the pixel grid, broadcastable to [M,N,H,W]."""
    sc, tc = central_view_index(spec.views_s, spec.views_t)
    ds = (sc - np.arange(spec.views_s, dtype=np.float64))[:, None, None, None]
    dt = (tc - np.arange(spec.views_t, dtype=np.float64))[None, :, None, None]
    y = np.arange(spec.height, dtype=np.float64)[None, None, :, None]
    x = np.arange(spec.width, dtype=np.float64)[None, None, None, :]
    return ds, dt, x, y


def render_plane_lf(spec: SceneSpec) -> OracleBundle:
    """Render a single fronto-parallel textured plane."""
    if len(spec.layers) != 1:
        raise ValueError(f"render_plane_lf expects one layer, got {len(spec.layers)}")
    spec.validate()
    layer = spec.layers[0]
    ds, dt, x, y = _view_coords(spec)
    shape = (spec.views_s, spec.views_t, spec.height, spec.width)
    u = np.broadcast_to(x + layer.disparity * ds, shape)
    v = np.broadcast_to(y + layer.disparity * dt, shape)
    luma = _texture(layer, spec)(u, v)
    return OracleBundle(
        hr_lf=LightField(luma),
        gt_disparity=np.full(shape, float(layer.disparity)),
        occlusion_mask=np.zeros(shape, bool),
        spec=spec,
    )


def render_occlusion_lf(spec: SceneSpec) -> OracleBundle:
    """Composite a masked front layer over a full back layer (layers ordered back to front)."""
    if len(spec.layers) != 2:
        raise ValueError(f"render_occlusion_lf expects two layers, got {len(spec.layers)}")
    spec.validate()
    back, front = spec.layers
    ds, dt, x, y = _view_coords(spec)
    shape = (spec.views_s, spec.views_t, spec.height, spec.width)
    ub = np.broadcast_to(x + back.disparity * ds, shape)
    vb = np.broadcast_to(y + back.disparity * dt, shape)
    uf = np.broadcast_to(x + front.disparity * ds, shape)
    vf = np.broadcast_to(y + front.disparity * dt, shape)
    covered = _mask(front, uf, vf)
    luma = np.where(covered, _texture(front, spec)(uf, vf), _texture(back, spec)(ub, vb))
    disparity = np.where(covered, float(front.disparity), float(back.disparity))
    # back-layer point visible here but hidden behind the front layer in the central view
    hidden_in_center = _mask(front, ub, vb)
    occlusion = ~covered & hidden_in_center
    return OracleBundle(hr_lf=LightField(luma), gt_disparity=disparity, occlusion_mask=occlusion, spec=spec)


def render(spec: SceneSpec) -> OracleBundle:
    return render_plane_lf(spec) if len(spec.layers) == 1 else render_occlusion_lf(spec)


def plane_scene(disparity: float, size: int = 64, views: int = 5, seed: int = 0, **kw) -> SceneSpec:
    return SceneSpec(height=size, width=size, views_s=views, views_t=views,
                     layers=(Layer(disparity=disparity, seed=seed),), rng_seed=seed, **kw)


def random_scene(rng: np.random.Generator, size: int, views: int, scale: int,
                 lr_disparity_range=(-2.0, 2.0), occlusion_prob: float = 0.5,
                 wavelengths=(7.0, 40.0)) -> SceneSpec:
    lo, hi = lr_disparity_range
    seed = int(rng.integers(0, 2**31 - 1))
    d_back = float(rng.uniform(lo, hi)) * scale
    layers = [Layer(disparity=d_back, seed=seed, level=float(rng.uniform(0.35, 0.65)))]
    if rng.random() < occlusion_prob:
        d_front = float(rng.uniform(lo, hi)) * scale
        kind = "disk" if rng.random() < 0.5 else "rect"
        layers.append(Layer(
            disparity=d_front,
            seed=seed + 1,
            level=float(rng.uniform(0.3, 0.7)),
            mask=kind,
            mask_center=(float(rng.uniform(0.3, 0.7) * size), float(rng.uniform(0.3, 0.7) * size)),
            mask_size=float(rng.uniform(0.12, 0.25) * size),
        ))
    return SceneSpec(height=size, width=size, views_s=views, views_t=views, layers=tuple(layers), rng_seed=seed,
                     min_wavelength=wavelengths[0], max_wavelength=wavelengths[1])


def make_corpus(n_scenes: int, rng_seed: int, scale: int, size: int = 64, views: int = 5,
                lr_disparity_range=(-2.0, 2.0), occlusion_prob: float = 0.5,
                wavelengths=(7.0, 40.0)) -> list[tuple[HybridInput, OracleBundle]]:
    """Deterministic list of (hybrid input, oracle) pairs; LR disparities drawn from ``lr_disparity_range``."""
    if n_scenes < 1:
        raise ValueError("n_scenes must be >= 1")
    rng = np.random.default_rng(rng_seed)
    corpus = []
    for _ in range(n_scenes):
        spec = random_scene(rng, size, views, scale, lr_disparity_range, occlusion_prob, wavelengths)
        bundle = render(spec)
        hybrid, _ = simulate_hybrid(bundle.hr_lf, scale)
        corpus.append((hybrid, bundle))
    return corpus


def split_corpus(corpus: list, n_test: int):
    """Last ``n_test`` scenes form the held-out split."""
    if not 0 <= n_test < len(corpus):
        raise ValueError(f"cannot hold out {n_test} of {len(corpus)} scenes")
    return corpus[: len(corpus) - n_test], corpus[len(corpus) - n_test:]


def with_disparity(spec: SceneSpec, disparity: float) -> SceneSpec:
    layers = (replace(spec.layers[0], disparity=disparity),) + tuple(spec.layers[1:])
    return replace(spec, layers=layers)
