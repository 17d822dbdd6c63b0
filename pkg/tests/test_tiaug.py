import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from samcl.data.synth import SyntheticFaceConfig, synth_face
from samcl.errors import ContractViolation, DegenerateRangeError, StatisticsUnavailableError
from samcl.tiaug import (AugConfig, AugParams, GeometricParams, OccluderParams, add_netd_noise, apply_geometric,
                         apply_params, augment, bimodality_disruption, fg_bg_stats, min_max_normalize,
                         occluder_footprint, render_occluders, sample_occluders, synth_occluders)


def face(seed=0):
    return synth_face(SyntheticFaceConfig(), np.random.default_rng(seed))


def block_image():
    img = np.full((32, 32), 22.0)
    mask = np.zeros((32, 32), dtype=np.int64)
    img[8:24, 8:24] = 34.0
    mask[8:24, 8:24] = 1
    mask[12:14, 10:14] = 4
    return img, mask


# -- occluders --------------------------------------------------------------------


def test_zero_count_is_identity():
    img, mask = face()
    out, occ = synth_occluders(img, mask, AugConfig(occluder_count_range=(0, 0)), np.random.default_rng(1))
    np.testing.assert_array_equal(out, img)
    assert not occ.any()


@pytest.mark.parametrize("softness", [0.0, 2.0])
def test_hot_ellipse_core_temperature(softness):
    img, mask = block_image()
    face_mean, bg_mean = fg_bg_stats(img, mask)
    assert face_mean == 34.0
    o = OccluderParams("ellipse", (16.0, 16.0), 0.5, 0.3, 0.8, "hot", 10.0, softness)
    out, occ = render_occluders(img, [o], face_mean, bg_mean)
    hard = occluder_footprint(o, img.shape)
    np.testing.assert_array_equal(occ, hard)
    # the core (well inside the rim) is fully replaced
    assert out[16, 16] == 44.0
    assert np.all(out[hard] > img[hard])
    np.testing.assert_array_equal(out[~hard], img[~hard])


def test_cold_object_anchored_below_background():
    img, mask = block_image()
    o = OccluderParams("rectangle", (4.0, 4.0), 0.2, 0.0, 1.0, "cold", -5.0, 0.0)
    out, _ = render_occluders(img, [o], 34.0, 22.0)
    assert out[4, 4] == 17.0


@given(st.integers(0, 2**32 - 1))
def test_every_object_is_hot_or_cold(seed):
    cfg = AugConfig(occluder_count_range=(1, 5))
    for o in sample_occluders((64, 64), cfg, np.random.default_rng(seed)):
        if o.regime == "hot":
            assert o.temperature_offset >= cfg.hot_offset_range[0] > 0
        else:
            assert o.temperature_offset <= -cfg.cold_offset_range[0] < 0


def test_ensure_both_regimes_with_two_or_more():
    cfg = AugConfig(occluder_count_range=(2, 5))
    for seed in range(30):
        regimes = {o.regime for o in sample_occluders((64, 64), cfg, np.random.default_rng(seed))}
        assert regimes == {"hot", "cold"}


def test_empty_region_statistics():
    img = np.full((8, 8), 30.0)
    with pytest.raises(StatisticsUnavailableError):
        fg_bg_stats(img, np.zeros((8, 8), dtype=int))
    with pytest.raises(StatisticsUnavailableError):
        synth_occluders(img, np.ones((8, 8), dtype=int), AugConfig(), np.random.default_rng(0))


def test_fg_bg_stats_uniform():
    img = np.full((4, 4), 22.0)
    mask = np.zeros((4, 4), dtype=int)
    img[1:3, 1:3], mask[1:3, 1:3] = 30.0, 2
    assert fg_bg_stats(img, mask) == (30.0, 22.0)


def test_hot_occluder_on_background_raises_bg_mean():
    img, mask = block_image()
    fg0, bg0 = fg_bg_stats(img, mask)
    o = OccluderParams("rectangle", (16.0, 3.5), 0.25, 0.0, 1.0, "hot", 6.0, 0.0)
    out, _ = render_occluders(img, [o], fg0, bg0)
    assert fg_bg_stats(out, mask)[1] > bg0


def test_normalized_means_spread_widens():
    cfg = AugConfig.occlusion_only()
    before, after = [], []
    for i in range(100):
        img, mask = face(i)
        s = augment(img, mask, cfg, np.random.default_rng([7, i]))
        before.append(fg_bg_stats(min_max_normalize(img), mask))
        after.append(fg_bg_stats(s.image, s.mask))
    before, after = np.array(before), np.array(after)
    assert after[:, 0].std() > before[:, 0].std()
    assert after[:, 1].std() > before[:, 1].std()


def test_histogram_mass_leaves_modes():
    cfg = AugConfig.occlusion_only(occluder_count_range=(1, 5), noise=False)
    for i in range(40):
        img, mask = face(100 + i)
        out, _ = synth_occluders(img, mask, cfg, np.random.default_rng(i))
        pre, post = bimodality_disruption(img, out, mask)
        assert post > pre


# -- noise ------------------------------------------------------------------------------------


@given(arrays(np.float64, (6, 7), elements=st.floats(-40, 120)), st.integers(0, 2**32 - 1),
       st.sampled_from([0.1, 0.05, 1e-3, 2.5]))
def test_noise_bound_exact(img, seed, netd):
    out = add_netd_noise(img, netd, np.random.default_rng(seed))
    d = out - img
    assert np.all(d >= 0.0) and np.all(d < netd)


def test_noise_tiny_bound():
    img, _ = face()
    out = add_netd_noise(img, 1e-12, np.random.default_rng(0))
    assert np.max(np.abs(out - img)) <= 1e-12


def test_noise_same_seed_same_field():
    img, _ = face()
    a = add_netd_noise(img, 0.1, np.random.default_rng(5))
    b = add_netd_noise(img, 0.1, np.random.default_rng(5))
    np.testing.assert_array_equal(a, b)


def test_noise_rejects_nonpositive():
    with pytest.raises(ContractViolation):
        add_netd_noise(np.zeros((2, 2)), 0.0, np.random.default_rng(0))


# -- geometry ------------------------------------------------------------------------------------


def test_hflip_twice_is_identity():
    img, mask = face()
    p = GeometricParams(hflip=True)
    a, m = apply_geometric(*apply_geometric(img, mask, p, 20.0), p, 20.0)
    np.testing.assert_array_equal(a, img)
    np.testing.assert_array_equal(m, mask)


def test_null_transform_is_identity():
    img, mask = face()
    a, m = apply_geometric(img, mask, GeometricParams(angle=0.0, resize=1.0, blur_sigma=0.0), 20.0)
    np.testing.assert_array_equal(a, img)
    np.testing.assert_array_equal(m, mask)


@pytest.mark.parametrize("seed", range(5))
def test_half_resize_shape_and_labels(seed):
    img, mask = face(seed)
    a, m = apply_geometric(img, mask, GeometricParams(resize=0.5), 20.0)
    assert a.shape == m.shape == (32, 32)
    assert set(np.unique(m)) <= set(np.unique(mask))


@given(st.integers(0, 2**32 - 1))
def test_geometry_never_invents_labels(seed):
    img, mask = face(seed % 7)
    cfg = AugConfig.geometric_only(output_size=(64, 64))
    s = augment(img, mask, cfg, np.random.default_rng(seed))
    assert s.image.shape == s.mask.shape == s.occlusion_map.shape == (64, 64)
    assert set(np.unique(s.mask)) <= set(np.unique(mask))


def test_resize_range_must_stay_within_half_and_double():
    with pytest.raises(ContractViolation):
        AugConfig(resize_range=(0.25, 1.0))
    with pytest.raises(ContractViolation):
        AugConfig(netd_max=0.0)


# -- normalization -------------------------------------------------------------------------------


def test_normalize_three_values():
    np.testing.assert_array_equal(min_max_normalize(np.array([20.0, 30.0, 40.0])), [0.0, 0.5, 1.0])


def test_hot_pixel_halves_contrast():
    # background 20, face 35; a 50 degree pixel doubles the range
    plain = min_max_normalize(np.array([20.0, 35.0]))
    occluded = min_max_normalize(np.array([20.0, 35.0, 50.0]))
    assert (occluded[1] - occluded[0]) == pytest.approx(0.5 * (plain[1] - plain[0]), abs=1e-15)


def test_normalize_extremes_exact():
    out = min_max_normalize(face()[0])
    assert out.min() == 0.0 and out.max() == 1.0


def test_normalize_constant_rejected():
    with pytest.raises(DegenerateRangeError):
        min_max_normalize(np.full((3, 3), 5.0))


# -- full pipeline ---------------------------------------------------------------------------------


def test_disabled_pipeline_is_normalization():
    img, mask = face()
    s = augment(img, mask, AugConfig.disabled(), np.random.default_rng(0))
    np.testing.assert_array_equal(s.image, min_max_normalize(img))
    np.testing.assert_array_equal(s.mask, mask)
    assert not s.occlusion_map.any()


@pytest.mark.parametrize("seed", range(4))
def test_replay_bit_identical(seed):
    img, mask = face(seed)
    s = augment(img, mask, AugConfig(output_size=(64, 64)), np.random.default_rng(seed))
    again = apply_params(img, mask, AugParams.from_json(s.applied_params.to_json()))
    assert again.image.tobytes() == s.image.tobytes()
    np.testing.assert_array_equal(again.mask, s.mask)
    np.testing.assert_array_equal(again.occlusion_map, s.occlusion_map)
    assert json.loads(again.applied_params.to_json()) == json.loads(s.applied_params.to_json())


def test_same_seed_same_sample():
    img, mask = face()
    a = augment(img, mask, AugConfig(), np.random.default_rng(9))
    b = augment(img, mask, AugConfig(), np.random.default_rng(9))
    assert a.image.tobytes() == b.image.tobytes()


@pytest.mark.parametrize("seed", range(6))
def test_unoccluded_pixels_follow_occluder_free_pipeline(seed):
    img, mask = face(seed)
    s = augment(img, mask, AugConfig(occluder_count_range=(1, 5), output_size=(64, 64)),
                np.random.default_rng(seed), normalize=False)
    p = s.applied_params
    bare = AugParams(p.geometric, [], p.noise_seed, p.netd_max, p.face_mean, p.background_mean)
    ref = apply_params(img, mask, bare, normalize=False)
    keep = ~s.occlusion_map
    np.testing.assert_array_equal(s.image[keep], ref.image[keep])
    # after normalization the two differ only by an affine rescaling
    a, b = min_max_normalize(s.image)[keep], min_max_normalize(ref.image)[keep]
    coef = np.polyfit(b, a, 1)
    np.testing.assert_allclose(np.polyval(coef, b), a, atol=1e-12)


@given(st.integers(0, 2**32 - 1))
def test_occlusion_and_noise_keep_mask(seed):
    img, mask = face(seed % 5)
    s = augment(img, mask, AugConfig.occlusion_only(occluder_count_range=(1, 5)), np.random.default_rng(seed))
    np.testing.assert_array_equal(s.mask, mask)
