from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridlf.autodiff import Tensor, backward, default_dtype
from hybridlf.autodiff.ops import ShapeError
from hybridlf.fusion import TERMS, TrainingError, attention_loss, fuse, loss_terms, total_loss


def leaf(x):
    return Tensor(np.asarray(x, np.float64), requires_grad=True, dtype=np.float64)


def branch(lf, att):
    return SimpleNamespace(lf=leaf(lf), attention=leaf(att))


def random_output(rng, shape=(2, 2, 4, 4)):
    sr = branch(rng.random(shape), rng.standard_normal(shape))
    warp = SimpleNamespace(lf=leaf(rng.random(shape)), attention=leaf(rng.standard_normal(shape)),
                           disparity=leaf(np.zeros(shape)))
    return fuse(sr, warp)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_attention_partition_of_unity_and_convexity(seed):
    r = np.random.default_rng(seed)
    with default_dtype(np.float64):
        out = random_output(r)
    c_sum = out.c_sr.data + out.c_warp.data
    np.testing.assert_allclose(c_sum, 1.0, atol=1e-12)
    lo = np.minimum(out.sr_lf.data, out.warp_lf.data)
    hi = np.maximum(out.sr_lf.data, out.warp_lf.data)
    assert np.all(out.fused.data >= lo - 1e-12) and np.all(out.fused.data <= hi + 1e-12)


def test_saturated_attention_selects_one_branch(f64, rng):
    sr = branch(rng.random((1, 1, 3, 3)), np.full((1, 1, 3, 3), 60.0))
    warp = branch(rng.random((1, 1, 3, 3)), np.full((1, 1, 3, 3), -60.0))
    out = fuse(sr, warp)
    np.testing.assert_allclose(out.fused.data, sr.lf.data, atol=1e-12)
    assert np.isfinite(out.c_warp.data).all()
    assert fuse(sr, warp).disparity is None


def test_equal_attention_averages(f64, rng):
    sr = branch(rng.random((1, 1, 3, 3)), np.zeros((1, 1, 3, 3)))
    warp = branch(rng.random((1, 1, 3, 3)), np.zeros((1, 1, 3, 3)))
    np.testing.assert_allclose(fuse(sr, warp).fused.data, 0.5 * (sr.lf.data + warp.lf.data))


def test_fuse_shape_errors(f64):
    with pytest.raises(ShapeError):
        fuse(branch(np.zeros((1, 1, 2, 2)), np.zeros((1, 1, 2, 2))), branch(np.zeros((1, 1, 2, 3)), np.zeros((1, 1, 2, 3))))
    with pytest.raises(ShapeError, match="attention"):
        fuse(branch(np.zeros((1, 1, 2, 2)), np.zeros((1, 1, 2, 1))), branch(np.zeros((1, 1, 2, 2)), np.zeros((1, 1, 2, 2))))


def test_attention_loss_closed_form_minimum(f64, rng):
    pred, target = rng.random((2, 3, 5)), rng.random((2, 3, 5))
    e2 = (pred - target) ** 2
    best = attention_loss(pred, target, -e2).item()
    assert best == pytest.approx(-np.linalg.norm(e2) / e2.size, rel=1e-10)
    for _ in range(20):  # no other attention map does better
        assert attention_loss(pred, target, rng.standard_normal(e2.shape)).item() >= best - 1e-15


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-3, 1e3), st.integers(0, 2**31 - 1))
def test_attention_loss_is_scale_invariant(k, seed):
    r = np.random.default_rng(seed)
    with default_dtype(np.float64):
        pred, target, att = r.random((3, 4)), r.random((3, 4)), r.standard_normal((3, 4))
        a = attention_loss(pred, target, att).item()
        b = attention_loss(pred, target, att * k).item()
    assert b == pytest.approx(a, rel=1e-9)


def test_attention_loss_zero_attention_is_finite(f64, rng):
    value = attention_loss(rng.random((2, 2)), rng.random((2, 2)), np.zeros((2, 2))).item()
    assert value == 0.0


def test_attention_loss_stops_gradient_at_prediction(f64, rng):
    pred = leaf(rng.random((2, 3)))
    att = leaf(rng.standard_normal((2, 3)))
    backward(attention_loss(pred, rng.random((2, 3)), att))
    assert pred.grad is None or not np.any(pred.grad)
    assert np.any(att.grad)


def test_loss_terms_and_weight_selection(f64, rng):
    out = random_output(rng)
    target = rng.random(out.fused.shape)
    terms = loss_terms(out, target)
    assert tuple(terms) == TERMS
    assert terms["lp"].item() == pytest.approx(np.abs(out.fused.data - target).mean())
    total, values = total_loss(out, target, weights=(0, 0, 0, 1.0, 0))
    assert total.item() == pytest.approx(values["lpw"])
    backward(total)
    # only the warp prediction receives gradient when l_w^p is the sole term
    assert out.warp_lf.grad is not None and np.any(out.warp_lf.grad)
    assert out.sr_lf.grad is None or not np.any(out.sr_lf.grad)
    total, values = total_loss(random_output(rng), target, weights=(2.0, 0, 0, 0, 0))
    assert total.item() == pytest.approx(2 * values["lp"])


def test_total_loss_is_weighted_sum(f64, rng):
    out = random_output(rng)
    target = rng.random(out.fused.shape)
    weights = (1.0, 0.5, 2.0, 0.25, 3.0)
    total, values = total_loss(out, target, weights)
    assert total.item() == pytest.approx(sum(w * values[k] for w, k in zip(weights, TERMS)))


def test_total_loss_rejects_bad_weights(f64, rng):
    out = random_output(rng)
    with pytest.raises(ValueError):
        total_loss(out, out.fused.data, weights=(1, 1, 1))
    with pytest.raises(ValueError):
        total_loss(out, out.fused.data, weights=(1, 1, 1, -1, 1))


def test_non_finite_term_is_named(f64, rng):
    shape = (1, 1, 2, 2)
    warp_lf = np.zeros(shape)
    warp_lf[0, 0, 0, 0] = np.nan
    with np.errstate(invalid="ignore"):
        out = fuse(branch(np.zeros(shape), np.zeros(shape)), branch(warp_lf, np.zeros(shape)))
        with pytest.raises(TrainingError, match="lp "):
            total_loss(out, np.zeros(shape))
        # with a finite fused prediction the first bad term is the warp one
        out.fused = Tensor(np.zeros(shape), dtype=np.float64)
        with pytest.raises(TrainingError, match="lpw"):
            total_loss(out, np.zeros(shape))
