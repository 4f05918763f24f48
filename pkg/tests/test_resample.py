from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridlf.data.resample import (
    bicubic_resample,
    bicubic_sample,
    bicubic_sample_stack,
    cubic_taps,
    keys_kernel,
    resample_matrix,
)


def test_keys_kernel_values():
    # a = -0.5: k(0)=1, k(+-1)=k(+-2)=0, k(0.5)=0.5625, k(1.5)=-0.0625
    np.testing.assert_allclose(keys_kernel([0, 1, 2, -1, 0.5, 1.5, 2.5]), [1, 0, 0, 0, 0.5625, -0.0625, 0])


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 1, exclude_max=True))
def test_tap_weights_partition_unity_and_reproduce_linears(f):
    coord = 10.0 + f
    idx, w, dw, _ = cubic_taps(np.array([coord]), 30)
    assert w.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.dot(w[0], idx[0]) == pytest.approx(coord, abs=1e-12)
    assert dw.sum() == pytest.approx(0.0, abs=1e-12)
    assert np.dot(dw[0], idx[0]) == pytest.approx(1.0, abs=1e-12)


def test_point_sampling_exact_at_integers(rng):
    img = rng.random((6, 7))
    ys, xs = np.meshgrid(np.arange(6.0), np.arange(7.0), indexing="ij")
    np.testing.assert_allclose(bicubic_sample(img, xs, ys), img, atol=1e-14)


def test_point_sampling_clamps_outside(rng):
    img = rng.random((5, 5))
    out = bicubic_sample(img, np.array([-3.0, 9.0]), np.array([2.0, -1.0]))
    np.testing.assert_allclose(out, [img[2, 0], img[0, 4]], atol=1e-14)


def test_stack_sampling_matches_per_image(rng):
    imgs = rng.random((3, 8, 9))
    x = rng.uniform(0, 8, (3, 4, 5))
    y = rng.uniform(0, 7, (3, 4, 5))
    ref = np.stack([bicubic_sample(imgs[k], x[k], y[k]) for k in range(3)])
    np.testing.assert_allclose(bicubic_sample_stack(imgs, x, y), ref, atol=1e-14)


def test_resample_matrix_rows_sum_to_one():
    for n, s in ((8, 2), (16, Fraction(1, 2)), (12, Fraction(1, 4)), (5, 3)):
        m = resample_matrix(n, s)
        assert m.shape == (int(n * Fraction(s)), n)
        np.testing.assert_allclose(m.sum(axis=1), 1.0, atol=1e-12)


def test_resample_matrix_rejects_fractional_size():
    with pytest.raises(ValueError, match="not an integer"):
        resample_matrix(5, Fraction(1, 2))
    with pytest.raises(ValueError, match="positive"):
        resample_matrix(5, 0)


def test_downscale_by_two_of_constant_and_ramp():
    const = np.full((8, 8), 0.3)
    np.testing.assert_allclose(bicubic_resample(const, Fraction(1, 2)), 0.3, atol=1e-14)
    # half-pixel-centred grid: output j samples source x = 2j + 0.5
    ramp = np.tile(np.arange(16.0), (4, 1))
    down = bicubic_resample(ramp, Fraction(1, 2))
    np.testing.assert_allclose(down[:, 1:-1], np.tile(2 * np.arange(1, 7) + 0.5, (2, 1)), atol=1e-12)


def test_upscale_direct_formula(rng):
    img = rng.random((6, 6))
    up = bicubic_resample(img, 2)
    # output pixel (3, 5) sits at source (1.25, 2.25)
    assert up[3, 5] == pytest.approx(float(bicubic_sample(img, np.array(2.25), np.array(1.25))), abs=1e-12)


def test_stacked_resample_is_bitwise_equal_to_single(rng):
    lf = rng.random((3, 2, 8, 10))
    stacked = bicubic_resample(lf, Fraction(1, 2))
    for s in range(3):
        for t in range(2):
            assert np.array_equal(stacked[s, t], bicubic_resample(lf[s, t], Fraction(1, 2)))
