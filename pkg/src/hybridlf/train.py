"""Patch sampling, the end-to-end training loop and full-image reconstruction."""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .autodiff import adam_step, no_grad
from .data.augment import random_augment
from .data.lightfield import HybridInput, LightField, simulate_hybrid
from .fusion import TERMS, TrainingError, total_loss
from .metrics import psnr
from .model import HybridModel, ModelConfig

log = logging.getLogger(__name__)

LOG_HEADER = ("step",) + TERMS + ("lr", "psnr_fused", "psnr_sr", "psnr_warp")
CHECKPOINT_NAME = "model.lfck"
METRICS_NAME = "metrics.csv"
TILE_OVERLAP = 8  # LR px of context kept on each side of a tile


@dataclass(frozen=True)
class TrainConfig:
    scale: int = 2
    lr: float | None = None  # None picks 1e-4 for scale <= 4 and 1e-5 for scale 8
    patience: int = 5
    weights: tuple = (1.0, 1.0, 1.0, 1.0, 1.0)
    batch_size: int = 1
    patch: int = 24
    max_steps: int = 2000
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    val_every: int = 100
    augment: bool = True
    model: ModelConfig = field(default_factory=ModelConfig)

    def __post_init__(self):
        if any(w < 0 for w in self.weights) or len(self.weights) != len(TERMS):
            raise ValueError(f"weights must be {len(TERMS)} non-negative values, got {self.weights}")
        if self.model.scale != self.scale:
            object.__setattr__(self, "model", replace(self.model, scale=self.scale))
        for name in ("patience", "batch_size", "patch", "max_steps", "val_every"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    @property
    def learning_rate(self) -> float:
        if self.lr is not None:
            return self.lr
        return 1e-4 if self.scale <= 4 else 1e-5

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        data = dict(data)
        model = ModelConfig.from_dict({"scale": data.get("scale", 2), **data.pop("model", {})})
        if "weights" in data:
            data["weights"] = tuple(data["weights"])
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown training options: {sorted(unknown)}")
        return cls(model=model, **data)

    @classmethod
    def from_json(cls, path) -> "TrainConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class PlateauSchedule:
    """Halve the learning rate after ``patience`` evaluations without a new best."""

    lr: float
    patience: int
    best: float = np.inf
    stale: int = 0

    def update(self, metric: float) -> float:
        if metric < self.best:
            self.best, self.stale = metric, 0
        else:
            self.stale += 1
            if self.stale >= self.patience:
                self.lr *= 0.5
                self.stale = 0
        return self.lr


@dataclass
class TrainResult:
    model: HybridModel
    log: list
    checkpoint: Path | None
    runtime_s: float
    final_terms: dict


def _hr_lightfield(item) -> LightField:
    if isinstance(item, LightField):
        return item
    if isinstance(item, tuple):
        item = item[-1]
    if hasattr(item, "hr_lf"):
        return item.hr_lf
    raise TypeError(f"cannot read an HR light field from {type(item).__name__}")


def sample_patch(hr_lf, patch: int, scale: int, rng: np.random.Generator, augment: bool = True):
    """Random aligned training crop: (hybrid input of the crop, HR target [M, N, p*a, p*a]).

    Augmentation is applied to the whole HR light field first, then a
    ``p*a`` square is cut at ``(a*y0, a*x0)`` and the hybrid input is
    simulated from it, so the LR patch is the bicubic downscale of the HR
    patch.
    """
    luma = _hr_lightfield(hr_lf).luma
    M, N, H, W = luma.shape
    size = patch * scale
    if size > min(H, W):
        raise ValueError(f"patch {patch} x scale {scale} exceeds HR size {H}x{W}")
    if augment:
        (luma,) = random_augment([luma], rng, rotate=(M == N))
    y0 = int(rng.integers(0, H // scale - patch + 1))
    x0 = int(rng.integers(0, W // scale - patch + 1))
    crop = np.ascontiguousarray(luma[:, :, scale * y0:scale * y0 + size, scale * x0:scale * x0 + size])
    hybrid, target = simulate_hybrid(LightField(crop), scale)
    return hybrid, target.luma


# -- reconstruction -------------------------------------------------------------


@dataclass
class Reconstruction:
    fused: np.ndarray
    sr: np.ndarray
    warp: np.ndarray
    c_sr: np.ndarray
    c_warp: np.ndarray
    disparity: np.ndarray

    FIELDS = ("fused", "sr", "warp", "c_sr", "c_warp", "disparity")


def _forward_arrays(model: HybridModel, lr: np.ndarray, center: np.ndarray) -> dict:
    with no_grad():
        out = model(lr, center)
    return {
        "fused": out.fused.data, "sr": out.sr_lf.data, "warp": out.warp_lf.data,
        "c_sr": out.c_sr.data, "c_warp": out.c_warp.data, "disparity": out.disparity.data,
    }


def _tiles(n: int, tile: int, overlap: int):
    """(core start, core end, context start, context end) along one LR axis."""
    for start in range(0, n, tile):
        end = min(start + tile, n)
        yield start, end, max(start - overlap, 0), min(end + overlap, n)


def reconstruct(hybrid: HybridInput, model: HybridModel, tile: int | None = None,
                overlap: int = TILE_OVERLAP) -> Reconstruction:
    """Full-image inference, optionally over LR tiles of ``tile`` px with ``overlap`` px of context."""
    if hybrid.scale != model.config.scale:
        raise ValueError(f"input scale {hybrid.scale} does not match checkpoint scale {model.config.scale}")
    a = hybrid.scale
    lr = hybrid.lr_lf.luma
    M, N, h, w = lr.shape
    if tile is None or tile >= max(h, w):
        return Reconstruction(**_forward_arrays(model, lr, hybrid.center))
    out = {k: np.zeros((M, N, h * a, w * a), np.float32) for k in Reconstruction.FIELDS}
    for ys, ye, cys, cye in _tiles(h, tile, overlap):
        for xs, xe, cxs, cxe in _tiles(w, tile, overlap):
            part = _forward_arrays(model, lr[:, :, cys:cye, cxs:cxe], hybrid.center[a * cys:a * cye, a * cxs:a * cxe])
            oy, ox = a * (ys - cys), a * (xs - cxs)
            for k in Reconstruction.FIELDS:
                out[k][:, :, a * ys:a * ye, a * xs:a * xe] = part[k][:, :, oy:oy + a * (ye - ys), ox:ox + a * (xe - xs)]
    return Reconstruction(**out)


# -- training -------------------------------------------------------------------


def _validate(model: HybridModel, scenes: list[LightField], scale: int) -> dict:
    lp, fused, sr, warp = [], [], [], []
    for hr in scenes:
        hybrid, target = simulate_hybrid(hr, scale)
        rec = reconstruct(hybrid, model)
        lp.append(float(np.mean(np.abs(rec.fused - target.luma))))
        fused.append(psnr(rec.fused, target.luma))
        sr.append(psnr(rec.sr, target.luma))
        warp.append(psnr(rec.warp, target.luma))
    return {"val_lp": float(np.mean(lp)), "psnr_fused": float(np.mean(fused)),
            "psnr_sr": float(np.mean(sr)), "psnr_warp": float(np.mean(warp))}


def _format(v) -> str:
    return str(v) if isinstance(v, int) else repr(float(v))


def _write_log(path: Path, rows: list[dict]) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="\n", encoding="ascii") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LOG_HEADER)
        for row in rows:
            writer.writerow([_format(row[k]) for k in LOG_HEADER])
    tmp.replace(path)


def train(corpus, config: TrainConfig, out_dir=None, val_corpus=None, model: HybridModel | None = None,
          checkpoint_name: str = CHECKPOINT_NAME, metrics_name: str = METRICS_NAME) -> TrainResult:
    """Train the joint model on random patches of ``corpus``.

    Every ``val_every`` steps the validation scenes (default: the last
    training scene) are reconstructed in full; the learning rate halves once
    validation L1 has not improved for ``patience`` consecutive evaluations.
    A log row and a checkpoint are written at each evaluation, so a
    non-finite loss aborts with the previous checkpoint intact.
    """
    scenes = [_hr_lightfield(item) for item in corpus]
    if not scenes:
        raise ValueError("training corpus is empty")
    val_scenes = [_hr_lightfield(item) for item in val_corpus] if val_corpus else scenes[-1:]
    views = (scenes[0].views_s, scenes[0].views_t)
    model_config = replace(config.model, scale=config.scale, views=views)
    model = model or HybridModel(model_config, seed=config.seed)
    params = model.parameters()
    rng = np.random.default_rng(config.seed)

    out_dir = Path(out_dir) if out_dir is not None else None
    ckpt = out_dir / checkpoint_name if out_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)

    schedule = PlateauSchedule(config.learning_rate, config.patience)
    rows: list[dict] = []
    sums = dict.fromkeys(TERMS, 0.0)
    count = 0
    start = time.perf_counter()
    last_terms: dict = {}
    for step in range(1, config.max_steps + 1):
        for _ in range(config.batch_size):
            scene = scenes[int(rng.integers(len(scenes)))]
            hybrid, target = sample_patch(scene, config.patch, config.scale, rng, config.augment)
            out = model(hybrid.lr_lf.luma, hybrid.center)
            try:
                loss, terms = total_loss(out, target, config.weights)
            except TrainingError as exc:
                where = f"; last good checkpoint: {ckpt}" if ckpt and ckpt.exists() else ""
                raise TrainingError(f"step {step}: {exc}{where}") from None
            if config.batch_size > 1:
                loss = loss * (1.0 / config.batch_size)
            loss.backward()
            for k in TERMS:
                sums[k] += terms[k]
            count += 1
            last_terms = terms
        for p in params:
            if p.grad is None:  # a branch whose loss terms all have zero weight
                p.zero_grad()
        adam_step(params, schedule.lr, config.beta1, config.beta2, config.eps)

        if step % config.val_every == 0 or step == config.max_steps:
            val = _validate(model, val_scenes, config.scale)
            row = {"step": step, **{k: sums[k] / count for k in TERMS}, "lr": schedule.lr,
                   **{k: val[k] for k in ("psnr_fused", "psnr_sr", "psnr_warp")}}
            rows.append(row)
            sums, count = dict.fromkeys(TERMS, 0.0), 0
            log.info("step %d lp %.5f val psnr fused %.2f sr %.2f warp %.2f lr %.2e", step, row["lp"],
                     val["psnr_fused"], val["psnr_sr"], val["psnr_warp"], schedule.lr)
            if out_dir:
                model.save(ckpt)
                _write_log(out_dir / metrics_name, rows)
            schedule.update(val["val_lp"])
    return TrainResult(model=model, log=rows, checkpoint=ckpt, runtime_s=time.perf_counter() - start,
                       final_terms=last_terms)
