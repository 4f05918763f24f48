"""Named finite-difference checks of every differentiable op and of both networks.

Used by the ``gradcheck`` CLI command and the test suite. Each case builds
tiny float64 inputs, reduces the op output against a fixed random weighting
and compares backward gradients with central differences.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Callable

import numpy as np

from .autodiff import (
    GradCheckReport,
    broadcast_to,
    clip,
    concat,
    conv2d,
    default_dtype,
    grad_check,
    grad_check_params,
    l1_loss,
    leaky_relu,
    maximum,
    no_grad,
    resample2d,
    softmax_pair,
    sqrt,
    square,
    stack,
    tabs,
    transposed_conv2d,
    tsum,
)
from .data.resample import resample_matrix

TOL = 1e-4


def _weighted(out, rng):
    return tsum(out * rng.standard_normal(out.shape))


def _away_from(x: np.ndarray, kinks, gap: float = 1e-3) -> np.ndarray:
    """Nudge entries off non-differentiable points so finite differences stay on one side."""
    x = x.copy()
    for k in kinks:
        near = np.abs(x - k) < gap
        x[near] = k + np.where(x[near] >= k, gap, -gap) * 2
    return x


def _case_elementwise(rng):
    a = rng.standard_normal((3, 4))
    b = rng.standard_normal((3, 4))
    pos = rng.uniform(0.5, 2.0, (3, 4))
    c = rng.standard_normal((4,))

    def f(t):
        x, y, p, z = t
        out = x * y + x / p - y + square(x) + sqrt(p) + x * z
        return _weighted(out, np.random.default_rng(1)) + tsum(out.mean(axis=0))

    return grad_check(f, [a, b, pos, c])


def _case_piecewise(rng):
    a = _away_from(rng.standard_normal((4, 5)), [0.0, -0.5, 0.5, 0.2])

    def f(t):
        (x,) = t
        out = tabs(x) + clip(x, -0.5, 0.5) + maximum(x, 0.2) + leaky_relu(x, 0.1)
        return _weighted(out, np.random.default_rng(2))

    return grad_check(f, [a])


def _case_shape(rng):
    a = rng.standard_normal((2, 3, 4))
    b = rng.standard_normal((2, 3, 4))
    c = rng.standard_normal((1, 3, 1))

    def f(t):
        x, y, z = t
        out = concat([x, y], axis=1).transpose(2, 0, 1).reshape(4, 12)
        g = stack([x[:, 1], y[1:, ::-1].reshape(3, 4)[:2]], axis=0)
        return (_weighted(out, np.random.default_rng(3)) + _weighted(g, np.random.default_rng(4))
                + _weighted(broadcast_to(z, (2, 3, 4)) * x, np.random.default_rng(5)))

    return grad_check(f, [a, b, c])


def _case_indexing(rng):
    a = rng.standard_normal((5, 4))
    idx = np.array([0, 2, 2, 4])

    def f(t):
        (x,) = t
        return _weighted(x[idx], np.random.default_rng(6)) + tsum(x[1:3, ::2] * x[1:3, 1::2])

    return grad_check(f, [a])


def _case_conv(rng):
    reports = []
    for stride, pad, k in ((1, 1, 3), (2, 1, 3), (1, 0, 1), (1, 2, 5)):
        x = rng.standard_normal((2, 3, 7 if stride == 2 else 6, 7 if stride == 2 else 6))
        w = rng.standard_normal((4, 3, k, k))
        b = rng.standard_normal(4)

        def f(t, stride=stride, pad=pad):
            return _weighted(conv2d(t[0], t[1], t[2], stride=stride, padding=pad), np.random.default_rng(7))

        reports.append(grad_check(f, [x, w, b]))
    return _worst(reports)


def _case_transposed_conv(rng):
    reports = []
    for stride, pad, k in ((2, 1, 4), (1, 1, 3), (2, 1, 3)):
        x = rng.standard_normal((2, 3, 4, 4))
        w = rng.standard_normal((3, 2, k, k))
        b = rng.standard_normal(2)

        def f(t, stride=stride, pad=pad):
            return _weighted(transposed_conv2d(t[0], t[1], t[2], stride=stride, padding=pad), np.random.default_rng(8))

        reports.append(grad_check(f, [x, w, b]))
    return _worst(reports)


def _case_softmax_l1(rng):
    a = rng.standard_normal((3, 4)) * 3
    b = rng.standard_normal((3, 4)) * 3
    target = rng.standard_normal((3, 4))

    def f(t):
        ca, cb = softmax_pair(t[0], t[1])
        return _weighted(ca, np.random.default_rng(9)) + l1_loss(cb * 2.0, target)

    return grad_check(f, [a, b])


def _case_resample(rng):
    x = rng.standard_normal((2, 8, 6))
    rows = resample_matrix(8, Fraction(1, 2))
    cols = resample_matrix(6, 2)
    return grad_check(lambda t: _weighted(resample2d(t[0], rows, cols), np.random.default_rng(10)), [x])


def _case_bicubic(rng):
    from .warpnet import bicubic_sample_diff

    image = rng.standard_normal((6, 7))
    coords = np.stack([rng.uniform(-1.0, 7.5, (3, 5)), rng.uniform(-1.0, 6.5, (3, 5))], axis=-1)
    coords = _away_from(coords, list(range(-1, 9)), gap=1e-3)
    return grad_check(lambda t: _weighted(bicubic_sample_diff(t[0], t[1]), np.random.default_rng(11)), [image, coords])


def _case_srnet(rng, scale=2):
    from .srnet import SrNet, SrNetConfig

    net = SrNet(SrNetConfig(scale=scale, channels=3, sas_blocks_per_level=1, hr_branch_convs=1), seed=1)
    lr = rng.random((3, 3, 4, 4))
    center = rng.random((4 * scale, 4 * scale))
    w1, w2 = rng.standard_normal((2, 3, 3, 4 * scale, 4 * scale))

    def loss(a, b):
        out = net(a, b)
        return tsum(out.lf * w1) + tsum(out.attention * w2)

    return grad_check_params(loss, net.params, [lr, center])


def _case_srnet_x4(rng):
    return _case_srnet(rng, scale=4)


def _case_warpnet(rng):
    from .warpnet import WarpNet, WarpNetConfig

    net = WarpNet(WarpNetConfig(scale=2, channels=3, stack_convs=2), (3, 3), seed=2)
    for p in net.params:
        # a visibly non-zero disparity exercises the coordinate path of the sampler
        if "disparity." in p.name:
            p.tensor.data[...] *= 10
    lr = rng.random((3, 3, 4, 4))
    center = rng.random((8, 8))
    w1, w2 = rng.standard_normal((2, 3, 3, 8, 8))

    def loss(a, b):
        out = net(a, b)
        return tsum(out.lf * w1) + tsum(out.attention * w2)

    return grad_check_params(loss, net.params, [lr, center])


def _case_total_loss(rng):
    from .fusion import attention_loss, total_loss
    from .model import HybridModel, ModelConfig

    model = HybridModel(ModelConfig(scale=2, views=(3, 3), channels=2, sas_blocks_per_level=1,
                                    hr_branch_convs=1, stack_convs=2), seed=3)
    lr = rng.random((3, 3, 4, 4))
    center = rng.random((8, 8))
    target = rng.random((3, 3, 8, 8))

    # the attention terms treat the squared error as a constant, so finite
    # differences are taken of that surrogate: errors frozen at the base point
    with no_grad():
        base = model(lr, center)
    frozen_sr, frozen_warp = base.sr_lf.data.copy(), base.warp_lf.data.copy()

    def loss(a, b):
        out = model(a, b)
        partial = total_loss(out, target, weights=(1.0, 1.0, 0.0, 1.0, 0.0))[0]
        return (partial + attention_loss(frozen_sr, target, out.sr_attention)
                + attention_loss(frozen_warp, target, out.warp_attention))

    return grad_check_params(loss, model.parameters(), [lr, center])


def _worst(reports: list[GradCheckReport]) -> GradCheckReport:
    worst = max(reports, key=lambda r: r.max_rel_error)
    return GradCheckReport(
        max_rel_error=worst.max_rel_error,
        per_input=[e for r in reports for e in r.per_input],
        tol=worst.tol,
        probes=sum(r.probes for r in reports),
    )


CASES: dict[str, Callable] = {
    "elementwise": _case_elementwise,
    "piecewise": _case_piecewise,
    "shape": _case_shape,
    "indexing": _case_indexing,
    "conv2d": _case_conv,
    "transposed_conv2d": _case_transposed_conv,
    "softmax_l1": _case_softmax_l1,
    "resample2d": _case_resample,
    "bicubic_sample": _case_bicubic,
    "srnet": _case_srnet,
    "srnet_x4": _case_srnet_x4,
    "warpnet": _case_warpnet,
    "total_loss": _case_total_loss,
}


def run(names=None, seed: int = 0) -> dict[str, GradCheckReport]:
    names = list(CASES) if names is None else list(names)
    unknown = [n for n in names if n not in CASES]
    if unknown:
        raise KeyError(f"unknown gradcheck case(s) {unknown}; choose from {sorted(CASES)}")
    results = {}
    with default_dtype(np.float64):
        for name in names:
            results[name] = CASES[name](np.random.default_rng(seed))
    return results
