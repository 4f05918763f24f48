import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import array_shapes, arrays

from hybridlf.autodiff import (
    Tape,
    Tensor,
    backward,
    broadcast_to,
    clip,
    concat,
    debug_mode,
    default_dtype,
    maximum,
    no_grad,
    sqrt,
    stack,
    tabs,
    tsum,
)


def leaf(x):
    return Tensor(np.asarray(x, dtype=np.float64), requires_grad=True, dtype=np.float64)


def test_default_dtype_is_float32_and_switchable():
    assert Tensor([1.0, 2.0]).dtype == np.float32
    with default_dtype(np.float64):
        assert Tensor([1.0]).dtype == np.float64
    assert Tensor([1.0]).dtype == np.float32


def test_product_rule(f64):
    a, b = leaf([1.0, 2.0, 3.0]), leaf([4.0, 5.0, 6.0])
    backward(tsum(a * b + a))
    np.testing.assert_allclose(a.grad, [5.0, 6.0, 7.0])
    np.testing.assert_allclose(b.grad, [1.0, 2.0, 3.0])


def test_shared_subexpression_accumulates(f64):
    x = leaf([3.0])
    y = x * x
    backward(tsum(y + y))  # d/dx 2x^2 = 4x
    np.testing.assert_allclose(x.grad, [12.0])


def test_grads_accumulate_across_backward_calls(f64):
    x = leaf([1.0, 1.0])
    backward(tsum(x * 2.0))
    backward(tsum(x * 3.0))
    np.testing.assert_allclose(x.grad, [5.0, 5.0])


def test_broadcast_grad_is_summed(f64):
    a = leaf(np.ones((3, 1)))
    b = leaf(np.arange(4.0))
    backward(tsum(a * b))
    np.testing.assert_allclose(a.grad, np.full((3, 1), 6.0))
    np.testing.assert_allclose(b.grad, np.full(4, 3.0))


def test_backward_requires_scalar(f64):
    with pytest.raises(ValueError, match="scalar"):
        backward(leaf([1.0, 2.0]) * 2.0)


def test_no_grad_records_nothing(f64):
    x = leaf([1.0])
    with no_grad():
        y = x * 2.0
    assert not y.requires_grad and y._parents == ()


def test_debug_mode_flags_non_finite(f64):
    x = leaf([0.0, 1.0])
    with debug_mode(), np.errstate(divide="ignore"), pytest.raises(FloatingPointError, match="div"):
        _ = 1.0 / x
    with np.errstate(divide="ignore"):
        assert np.isinf((1.0 / x).data[0])  # outside debug mode inf passes silently


def test_tape_is_topological(f64):
    x = leaf([1.0])
    y = x * 2.0
    z = y + x
    out = tsum(z * y)
    order = {id(n): i for i, n in enumerate(Tape.from_output(out).nodes)}
    for node in (y, z):
        for parent in (p for p in node._parents if p.requires_grad):
            assert order[id(parent)] < order[id(node)]


def test_deep_chain_does_not_recurse(f64):
    x = leaf([1.0])
    y = x
    for _ in range(5000):
        y = y + 0.0
    backward(tsum(y))
    np.testing.assert_allclose(x.grad, [1.0])


def test_piecewise_grads(f64):
    x = leaf([-2.0, -0.3, 0.4, 3.0])
    backward(tsum(tabs(x)) + tsum(clip(x, -1.0, 1.0)) + tsum(maximum(x, 0.0)))
    np.testing.assert_allclose(x.grad, [-1 + 0 + 0, -1 + 1 + 0, 1 + 1 + 1, 1 + 0 + 1])


def test_sqrt_and_division(f64):
    x = leaf([4.0])
    backward(tsum(sqrt(x) / x))  # x^-1/2 -> -1/2 x^-3/2
    np.testing.assert_allclose(x.grad, [-0.5 * 4.0**-1.5])


def test_concat_stack_and_indexing(f64):
    a, b = leaf(np.ones((2, 2))), leaf(np.ones((2, 3)))
    out = concat([a, b], axis=1)
    assert out.shape == (2, 5)
    backward(tsum(out * np.arange(10.0).reshape(2, 5)))
    np.testing.assert_allclose(a.grad, [[0, 1], [5, 6]])
    s = stack([a, a], axis=0)
    assert s.shape == (2, 2, 2)
    x = leaf(np.arange(5.0))
    backward(tsum(x[np.array([1, 1, 3])]))
    np.testing.assert_allclose(x.grad, [0, 2, 0, 1, 0])


def test_concat_error_names_axis(f64):
    with pytest.raises(ValueError, match="axis"):
        concat([leaf(np.ones((2, 2))), leaf(np.ones((3, 3)))], axis=1)


def test_reshape_transpose_broadcast(f64):
    x = leaf(np.arange(6.0).reshape(2, 3))
    y = x.transpose(1, 0).reshape(6)
    backward(tsum(y * np.arange(6.0)))
    np.testing.assert_allclose(x.grad, np.arange(6.0).reshape(3, 2).T)
    z = leaf(np.ones((1, 3)))
    backward(tsum(broadcast_to(z, (4, 3))))
    np.testing.assert_allclose(z.grad, np.full((1, 3), 4.0))


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, array_shapes(min_dims=1, max_dims=3, max_side=4),
              elements=st.floats(-10, 10)))
def test_mean_grad_is_uniform(values):
    with default_dtype(np.float64):
        x = leaf(values)
        backward(x.mean())
        np.testing.assert_allclose(x.grad, np.full(values.shape, 1.0 / values.size))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_unbroadcast_matches_sum_rule(rows, cols, seed):
    r = np.random.default_rng(seed)
    with default_dtype(np.float64):
        a = leaf(r.standard_normal((rows, 1)))
        b = leaf(r.standard_normal((1, cols)))
        w = r.standard_normal((rows, cols))
        backward(tsum((a + b) * w))
        np.testing.assert_allclose(a.grad[:, 0], w.sum(axis=1))
        np.testing.assert_allclose(b.grad[0], w.sum(axis=0))


def test_ndarray_on_the_left_defers_to_tensor(f64):
    x = leaf([1.0, 2.0])
    y = np.array([3.0, 4.0]) * x + np.array([1.0, 1.0])
    assert isinstance(y, Tensor)
    backward(tsum(y))
    np.testing.assert_allclose(x.grad, [3.0, 4.0])
