"""Named parameters and the Adam optimizer."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .tensor import Tensor


@dataclass(eq=False)
class Parameter:
    name: str
    tensor: Tensor
    adam_m: np.ndarray = field(default=None, repr=False)
    adam_v: np.ndarray = field(default=None, repr=False)
    step_count: int = 0

    def __post_init__(self):
        self.tensor.requires_grad = True
        if self.adam_m is None:
            self.adam_m = np.zeros_like(self.tensor.data)
        if self.adam_v is None:
            self.adam_v = np.zeros_like(self.tensor.data)

    @property
    def data(self) -> np.ndarray:
        return self.tensor.data

    @property
    def grad(self):
        return self.tensor.grad

    @property
    def shape(self) -> tuple:
        return self.tensor.shape

    def zero_grad(self) -> None:
        self.tensor.grad = np.zeros_like(self.tensor.data)


class ParameterSet:
    """Ordered, uniquely named collection of parameters belonging to one model."""

    def __init__(self, prefix: str = ""):
        self.prefix = prefix
        self._params: dict[str, Parameter] = {}

    def add(self, name: str, value: np.ndarray) -> Tensor:
        full = self.prefix + name
        if full in self._params:
            raise KeyError(f"duplicate parameter name {full!r}")
        param = Parameter(full, Tensor(value, requires_grad=True))
        self._params[full] = param
        return param.tensor

    def __getitem__(self, name: str) -> Tensor:
        return self._params[self.prefix + name].tensor

    def __contains__(self, name: str) -> bool:
        return self.prefix + name in self._params

    def __iter__(self) -> Iterator[Parameter]:
        return iter(self._params.values())

    def __len__(self) -> int:
        return len(self._params)

    def state_dict(self) -> dict[str, np.ndarray]:
        return {p.name: p.data for p in self}

    def load_state_dict(self, state: dict[str, np.ndarray], strict: bool = True) -> None:
        for p in self:
            if p.name not in state:
                if strict:
                    raise KeyError(f"checkpoint is missing parameter {p.name!r}")
                continue
            value = np.asarray(state[p.name])
            if value.shape != p.shape:
                raise ValueError(f"parameter {p.name!r}: shape {value.shape} != {p.shape}")
            p.tensor.data = np.ascontiguousarray(value, dtype=p.data.dtype)

    def astype(self, dtype) -> None:
        for p in self:
            p.tensor.data = p.tensor.data.astype(dtype)
            p.adam_m = p.adam_m.astype(dtype)
            p.adam_v = p.adam_v.astype(dtype)


def zero_grad(params: Iterable[Parameter]) -> None:
    for p in params:
        p.zero_grad()


def adam_step(params: Iterable[Parameter], lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
    """One bias-corrected Adam update; gradients are reset to zero afterwards."""
    params = list(params)
    for p in params:
        if p.grad is None:
            raise ValueError(f"adam_step: parameter {p.name!r} has no gradient")
    for p in params:
        g = p.grad.astype(p.data.dtype)
        p.step_count += 1
        t = p.step_count
        p.adam_m = beta1 * p.adam_m + (1.0 - beta1) * g
        p.adam_v = beta2 * p.adam_v + (1.0 - beta2) * g * g
        m_hat = p.adam_m / (1.0 - beta1**t)
        v_hat = p.adam_v / (1.0 - beta2**t)
        p.tensor.data = (p.data - lr * m_hat / (np.sqrt(v_hat) + eps)).astype(p.data.dtype)
        p.zero_grad()
