import numpy as np
import pytest

from hybridlf import gradsuite
from hybridlf.autodiff import (
    ShapeError,
    Tensor,
    backward,
    concat_channels,
    conv2d,
    l1_loss,
    leaky_relu,
    softmax_pair,
    transposed_conv2d,
    tsum,
)


def naive_conv(x, w, b, stride, pad):
    """Direct cross-correlation loop, the textbook definition."""
    B, C, H, W = x.shape
    O, _, k, _ = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    Ho = (H + 2 * pad - k) // stride + 1
    Wo = (W + 2 * pad - k) // stride + 1
    out = np.zeros((B, O, Ho, Wo))
    for n in range(B):
        for o in range(O):
            for i in range(Ho):
                for j in range(Wo):
                    patch = xp[n, :, i * stride:i * stride + k, j * stride:j * stride + k]
                    out[n, o, i, j] = np.sum(patch * w[o]) + (b[o] if b is not None else 0.0)
    return out


def naive_transposed_conv(x, w, stride, pad):
    """Scatter form: every input pixel stamps its kernel into the output."""
    B, C, H, W = x.shape
    _, O, k, _ = w.shape
    Hf, Wf = (H - 1) * stride + k, (W - 1) * stride + k
    full = np.zeros((B, O, Hf, Wf))
    for n in range(B):
        for c in range(C):
            for i in range(H):
                for j in range(W):
                    full[n, :, i * stride:i * stride + k, j * stride:j * stride + k] += x[n, c, i, j] * w[c]
    return full[:, :, pad:Hf - pad, pad:Wf - pad]


@pytest.mark.parametrize("stride,pad,k", [(1, 1, 3), (2, 1, 3), (1, 0, 1), (1, 2, 5), (2, 0, 3)])
def test_conv_matches_direct_loop(rng, stride, pad, k):
    x = rng.standard_normal((2, 3, 9, 9))
    w = rng.standard_normal((4, 3, k, k))
    b = rng.standard_normal(4)
    out = conv2d(Tensor(x, dtype=np.float64), Tensor(w, dtype=np.float64), Tensor(b, dtype=np.float64),
                 stride=stride, padding=pad)
    np.testing.assert_allclose(out.data, naive_conv(x, w, b, stride, pad), atol=1e-12)


@pytest.mark.parametrize("stride,pad,k", [(2, 1, 4), (1, 1, 3), (2, 1, 3), (2, 0, 2)])
def test_transposed_conv_matches_scatter(rng, stride, pad, k):
    x = rng.standard_normal((2, 3, 4, 5))
    w = rng.standard_normal((3, 2, k, k))
    out = transposed_conv2d(Tensor(x, dtype=np.float64), Tensor(w, dtype=np.float64), stride=stride, padding=pad)
    np.testing.assert_allclose(out.data, naive_transposed_conv(x, w, stride, pad), atol=1e-12)


def test_transposed_conv_is_adjoint_of_conv(rng):
    # <conv(x), y> == <x, convT(y)> with the same weight viewed as [C_out, C_in]
    x = rng.standard_normal((1, 3, 7, 7))
    w = rng.standard_normal((2, 3, 3, 3))
    y = rng.standard_normal((1, 2, 4, 4))
    cx = conv2d(Tensor(x, dtype=np.float64), Tensor(w, dtype=np.float64), stride=2, padding=1).data
    ty = transposed_conv2d(Tensor(y, dtype=np.float64), Tensor(w, dtype=np.float64), stride=2, padding=1).data
    assert ty.shape == x.shape
    lhs = np.sum(cx * y)
    rhs = np.sum(x * ty)
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_bilinear_upsampler_output_size():
    x = Tensor(np.ones((1, 1, 5, 6)))
    w = Tensor(np.ones((1, 1, 4, 4)))
    assert transposed_conv2d(x, w, stride=2, padding=1).shape == (1, 1, 10, 12)


def test_conv_errors_name_the_axis():
    x = Tensor(np.ones((1, 3, 5, 5)))
    with pytest.raises(ShapeError, match="dim 1"):
        conv2d(x, Tensor(np.ones((2, 4, 3, 3))))
    with pytest.raises(ShapeError, match="odd"):
        conv2d(x, Tensor(np.ones((2, 3, 2, 2))))
    with pytest.raises(ShapeError, match="rank"):
        conv2d(Tensor(np.ones((3, 5, 5))), Tensor(np.ones((2, 3, 3, 3))))


def test_leaky_relu_values_and_slope_check():
    out = leaky_relu(Tensor([-2.0, 0.0, 3.0]), 0.1)
    np.testing.assert_allclose(out.data, [-0.2, 0.0, 3.0], rtol=1e-6)
    with pytest.raises(ValueError):
        leaky_relu(Tensor([1.0]), 1.0)


def test_softmax_pair_is_stable_and_normalized(f64):
    a = Tensor(np.array([1000.0, -1000.0, 0.0, 3.0]))
    b = Tensor(np.array([-1000.0, 1000.0, 0.0, 1.0]))
    ca, cb = softmax_pair(a, b)
    assert np.all(np.isfinite(ca.data))
    np.testing.assert_allclose(ca.data + cb.data, 1.0, atol=1e-15)
    np.testing.assert_allclose(ca.data[:3], [1.0, 0.0, 0.5])
    assert ca.data[3] == pytest.approx(np.exp(3) / (np.exp(3) + np.exp(1)))


def test_concat_channels_and_l1(f64):
    a = Tensor(np.zeros((2, 1, 3, 3)), requires_grad=True)
    b = Tensor(np.ones((2, 2, 3, 3)))
    assert concat_channels(a, b).shape == (2, 3, 3, 3)
    with pytest.raises(ShapeError):
        concat_channels(a, Tensor(np.ones((2, 1, 4, 3))))
    loss = l1_loss(a, np.full((2, 1, 3, 3), 2.0))
    assert loss.data == pytest.approx(2.0)
    backward(loss)
    np.testing.assert_allclose(a.grad, np.full((2, 1, 3, 3), -1.0 / 18))


@pytest.mark.parametrize("name", sorted(gradsuite.CASES))
def test_gradient_suite_case(name):
    report = gradsuite.run([name])[name]
    assert report.max_rel_error < gradsuite.TOL, report
