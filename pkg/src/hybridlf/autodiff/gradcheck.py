"""Central finite-difference verification of backward passes."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor, default_dtype, no_grad


@dataclass
class GradCheckReport:
    max_rel_error: float
    per_input: list = field(default_factory=list)
    tol: float = 1e-4
    probes: int = 0

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.max_rel_error) and self.max_rel_error < self.tol)


def grad_check(
    f: Callable[[Sequence[Tensor]], Tensor],
    inputs: Sequence,
    tol: float = 1e-4,
    h: float = 1e-6,
    max_probes: int | None = 32,
    seed: int = 0,
    refine: int = 2,
) -> GradCheckReport:
    """Compare backward gradients of scalar ``f(inputs)`` against central differences.

    All inputs are promoted to float64. Tensors with more than ``max_probes``
    elements are checked on a random subset of entries. The relative error of
    an entry is ``|analytic - numeric| / max(|analytic|, |numeric|, 1e-2 * G)``
    with ``G`` the largest numeric gradient magnitude of that input, so entries
    that are tiny next to the rest of the gradient do not dominate the report.

    A central difference whose stencil straddles a kink of a piecewise-linear
    op (leaky ReLU, clip, abs) is off by the slope jump. Entries failing
    ``tol`` are therefore re-measured up to ``refine`` times with a step ten
    times smaller each time, keeping the closest estimate; a kink-free stencil
    agrees with the analytic value, whereas a wrong backward pass disagrees at
    every step size.
    """
    rng = np.random.default_rng(seed)
    with default_dtype(np.float64):
        tensors = [Tensor(np.asarray(x.data if isinstance(x, Tensor) else x, dtype=np.float64), requires_grad=True)
                   for x in inputs]
        out = f(tensors)
        if out.size != 1:
            raise ValueError("grad_check requires a scalar-valued function")
        out.backward()
        analytic = [t.grad if t.grad is not None else np.zeros_like(t.data) for t in tensors]

        def evaluate() -> float:
            with no_grad():
                return float(f(tensors).data.reshape(-1)[0])

        worst = 0.0
        per_input = []
        total = 0
        for t, ga in zip(tensors, analytic):
            flat = t.data.reshape(-1)
            if max_probes is None or flat.size <= max_probes:
                idx = np.arange(flat.size)
            else:
                idx = np.sort(rng.choice(flat.size, size=max_probes, replace=False))

            def central(i, step):
                orig = flat[i]
                flat[i] = orig + step
                fp = evaluate()
                flat[i] = orig - step
                fm = evaluate()
                flat[i] = orig
                return (fp - fm) / (2.0 * step)

            numeric = np.array([central(i, h) for i in idx])
            an = ga.reshape(-1)[idx]
            floor = max(1e-2 * float(np.max(np.abs(numeric), initial=0.0)), 1e-10)

            def rel_errors(num):
                return np.abs(an - num) / np.maximum(np.maximum(np.abs(an), np.abs(num)), floor)

            errors = rel_errors(numeric)
            step = h
            for _ in range(refine):
                bad = np.flatnonzero(errors >= tol)
                if bad.size == 0:
                    break
                step /= 10.0
                for k in bad:
                    retry = central(idx[k], step)
                    err = abs(an[k] - retry) / max(abs(an[k]), abs(retry), floor)
                    if err < errors[k]:
                        numeric[k], errors[k] = retry, err
            rel = float(np.max(errors, initial=0.0))
            per_input.append(rel)
            worst = max(worst, rel)
            total += idx.size
    return GradCheckReport(max_rel_error=worst, per_input=per_input, tol=tol, probes=total)


def grad_check_params(loss_fn: Callable[[], Tensor], params, inputs: Sequence = (), **kw) -> GradCheckReport:
    """:func:`grad_check` over every parameter of ``params`` followed by ``inputs``.

    ``loss_fn(*inputs)`` must read its weights from ``params``; parameter
    tensors are swapped for the probe tensors for the duration of the check.
    """
    plist = list(params)
    originals = [p.tensor for p in plist]
    n = len(plist)

    def f(tensors):
        for p, t in zip(plist, tensors[:n]):
            p.tensor = t
        return loss_fn(*tensors[n:])

    try:
        return grad_check(f, [p.tensor for p in plist] + list(inputs), **kw)
    finally:
        for p, t in zip(plist, originals):
            p.tensor = t
