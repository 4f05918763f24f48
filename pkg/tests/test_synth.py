import numpy as np
import pytest

from hybridlf.data import structure_check
from hybridlf.synth import (
    Layer,
    SceneSpec,
    Texture,
    make_corpus,
    plane_scene,
    random_scene,
    render,
    render_occlusion_lf,
    render_plane_lf,
    split_corpus,
    with_disparity,
)


def test_plane_views_are_shifted_copies():
    b = render_plane_lf(plane_scene(2.0, size=24, views=3, seed=1))
    luma = b.hr_lf.luma
    # view (0, 1) sees the central view moved by d * (s_c - s) = +2 px in x
    np.testing.assert_allclose(luma[0, 1, :, :-2], luma[1, 1, :, 2:], atol=1e-12)
    np.testing.assert_array_equal(b.gt_disparity, 2.0)
    assert not b.occlusion_mask.any()


def test_zero_disparity_views_identical():
    luma = render(plane_scene(0.0, size=16, views=3)).hr_lf.luma
    assert np.all(luma == luma[1, 1])


def test_texture_range_and_band():
    tex = Texture(seed=3, level=0.4)
    u, v = np.meshgrid(np.arange(200.0), np.arange(200.0))
    values = tex(u, v)
    assert values.min() > 0.0 and values.max() < 1.0
    wavelengths = 1.0 / np.hypot(tex.fx, tex.fy)
    assert np.all((wavelengths >= 7.0) & (wavelengths <= 40.0))


def test_validate_rejects_large_disparity():
    with pytest.raises(ValueError, match="overlap"):
        render(plane_scene(8.0, size=32, views=5))
    with pytest.raises(ValueError, match="layer"):
        SceneSpec(8, 8).validate()


def test_occlusion_bundle_semantics():
    spec = SceneSpec(32, 32, 5, 5, layers=(
        Layer(disparity=-1.0, seed=1),
        Layer(disparity=2.0, seed=2, mask="rect", mask_center=(16.0, 16.0), mask_size=6.0),
    ))
    b = render_occlusion_lf(spec)
    assert b.gt_disparity[2, 2, 16, 16] == 2.0 and b.gt_disparity[2, 2, 0, 0] == -1.0
    assert not b.occlusion_mask[2, 2].any()  # nothing is hidden from the central view in itself
    assert b.occlusion_mask.any()
    # occluded samples belong to the back layer
    assert np.all(b.gt_disparity[b.occlusion_mask] == -1.0)
    assert structure_check(b.hr_lf, b.gt_disparity).passed


def test_render_dispatch_and_layer_counts():
    spec = plane_scene(1.0, size=16, views=3)
    with pytest.raises(ValueError, match="two layers"):
        render_occlusion_lf(spec)
    with pytest.raises(ValueError, match="one layer"):
        render_plane_lf(with_disparity(SceneSpec(16, 16, 3, 3, layers=(Layer(0.0), Layer(1.0, mask="none"))), 0.0))


def test_corpus_is_deterministic_and_split():
    a = make_corpus(3, rng_seed=7, scale=2, size=32)
    b = make_corpus(3, rng_seed=7, scale=2, size=32)
    for (ha, ba), (hb, bb) in zip(a, b):
        np.testing.assert_array_equal(ba.hr_lf.luma, bb.hr_lf.luma)
        np.testing.assert_array_equal(ha.lr_lf.luma, hb.lr_lf.luma)
    assert a[0][0].lr_lf.shape == (5, 5, 16, 16)
    train, test = split_corpus(a, 1)
    assert len(train) == 2 and test[0] is a[2]
    with pytest.raises(ValueError):
        split_corpus(a, 3)


def test_random_scene_disparity_range():
    rng = np.random.default_rng(0)
    for _ in range(20):
        spec = random_scene(rng, 64, 5, 2, lr_disparity_range=(-2, 2))
        assert all(abs(layer.disparity) <= 4.0 for layer in spec.layers)
        spec.validate()
