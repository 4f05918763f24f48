"""The full hybrid model: SR-Net and Warp-Net side by side, fused by attention."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .autodiff import as_tensor, load_checkpoint, save_checkpoint
from .autodiff.checkpoint import CheckpointError
from .fusion import FusionOutput, fuse
from .srnet import SrNetConfig, build_srnet_params, sr_forward
from .warpnet import WarpNetConfig, build_warpnet_params, warp_forward


@dataclass(frozen=True)
class ModelConfig:
    scale: int = 2
    views: tuple = (5, 5)
    channels: int = 16
    sas_blocks_per_level: int = 2
    hr_branch_convs: int = 2
    stack_convs: int = 5
    d_max: float = 4.0
    slope: float = 0.1

    @property
    def sr(self) -> SrNetConfig:
        return SrNetConfig(self.scale, self.channels, self.sas_blocks_per_level, self.hr_branch_convs, self.slope)

    @property
    def warp(self) -> WarpNetConfig:
        return WarpNetConfig(self.scale, self.channels, self.stack_convs, self.d_max, self.slope)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        data = dict(data)
        if "views" in data:
            data["views"] = tuple(data["views"])
        return cls(**data)


class HybridModel:
    def __init__(self, config: ModelConfig, seed: int = 0):
        self.config = config
        rng = np.random.default_rng(seed)
        self.sr_params = build_srnet_params(config.sr, rng)
        self.warp_params = build_warpnet_params(config.warp, config.views, rng)

    def parameters(self):
        return list(self.sr_params) + list(self.warp_params)

    def state_dict(self) -> dict:
        return {**self.sr_params.state_dict(), **self.warp_params.state_dict()}

    def load_state_dict(self, state: dict, strict: bool = True) -> None:
        expected = {p.name for p in self.parameters()}
        if strict and set(state) - expected:
            raise KeyError(f"unexpected parameters in checkpoint: {sorted(set(state) - expected)[:3]}")
        self.sr_params.load_state_dict(state, strict)
        self.warp_params.load_state_dict(state, strict)

    def __call__(self, lr_lf, center) -> FusionOutput:
        lr_lf, center = as_tensor(lr_lf), as_tensor(center)
        if tuple(lr_lf.shape[:2]) != tuple(self.config.views):
            raise ValueError(f"model expects {self.config.views} views, got {lr_lf.shape[:2]}")
        sr_out = sr_forward(lr_lf, center, self.config.sr, self.sr_params)
        warp_out = warp_forward(lr_lf, center, self.config.warp, self.warp_params)
        return fuse(sr_out, warp_out)

    # -- persistence ------------------------------------------------------------

    def save(self, path) -> None:
        """Write the LFCK checkpoint and a ``<path>.json`` sidecar holding the config."""
        path = Path(path)
        save_checkpoint(path, self.state_dict())
        Path(f"{path}.json").write_text(self.config.to_json() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "HybridModel":
        path = Path(path)
        sidecar = Path(f"{path}.json")
        if not sidecar.exists():
            raise CheckpointError(f"{path}: config sidecar {sidecar.name} not found")
        config = ModelConfig.from_dict(json.loads(sidecar.read_text(encoding="utf-8")))
        model = cls(config)
        model.load_state_dict(load_checkpoint(path))
        return model
