import math
from collections import Counter
from itertools import permutations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from samcl import tensor as T
from samcl.errors import ContractViolation
from samcl.gradcheck import check_gradients
from samcl.loss import (LossConfig, aux_forward, build_auxnet, ce_distance, class_swap, derangements, one_hot,
                        rmi_distance, sample_derangement, samcl_loss)
from samcl.loss.rmi import pixel_cross_entropy
from samcl.loss.samcl import hinge, samcl_terms, triplet_term
from samcl.tensor import Tensor


def blob_mask(rng, n, c, h, w):
    coarse = rng.integers(0, c, size=(n, h // 4, w // 4))
    m = np.repeat(np.repeat(coarse, 4, axis=1), 4, axis=2)
    for i in range(n):
        for k in range(c):
            m[i, k, 2 * k] = k
    return m


def two_class_instance():
    """Spatially varied 8x8 two-class mask with a saturated matching logit map."""
    m = np.zeros((1, 8, 8), dtype=int)
    m[0, 2:6, 1:5] = 1
    m[0, 0, 6:] = 1
    y = one_hot(m, 2)
    return y, Tensor(np.where(y > 0, 10.0, -10.0))


# -- one-hot and class swap ---------------------------------------------------------


def test_one_hot_single_pixel():
    np.testing.assert_array_equal(one_hot(np.array([[2]]), 3)[0, :, 0, 0], [0, 0, 1])


@given(st.integers(2, 7), st.integers(0, 2**32 - 1))
def test_one_hot_round_trip(c, seed):
    m = np.random.default_rng(seed).integers(0, c, size=(2, 5, 4))
    y = one_hot(m, c)
    np.testing.assert_array_equal(y.sum(axis=1), 1.0)
    np.testing.assert_array_equal(y.argmax(axis=1), m)


def test_one_hot_out_of_range_names_pixel():
    m = np.zeros((1, 3, 3), dtype=int)
    m[0, 1, 2] = 7
    with pytest.raises(ContractViolation, match=r"row=1, col=2"):
        one_hot(m, 6)


@pytest.mark.parametrize("c", range(2, 7))
def test_derangement_enumeration_matches_brute_force(c):
    brute = [p for p in permutations(range(c)) if all(p[i] != i for i in range(c))]
    assert derangements(c) == brute
    # subfactorial: !n = round(n! / e)
    assert len(brute) == round(math.factorial(c) / math.e)


@given(st.integers(2, 12), st.integers(0, 2**32 - 1))
def test_sampled_permutation_has_no_fixed_point(c, seed):
    perm = sample_derangement(c, np.random.default_rng(seed))
    assert sorted(perm) == list(range(c))
    assert all(p != i for i, p in enumerate(perm))


def test_two_classes_unique_swap(rng):
    assert class_swap(one_hot(np.array([[0, 1]]), 2), rng).permutation == (1, 0)


def test_three_class_swap_frequencies():
    rng = np.random.default_rng(2024)
    counts = Counter(sample_derangement(3, rng) for _ in range(1000))
    assert set(counts) == {(1, 2, 0), (2, 0, 1)}
    assert abs(counts[(1, 2, 0)] / 1000 - 0.5) <= 0.05


def test_class_swap_content_and_bitmaps(rng):
    c = 5
    y = one_hot(blob_mask(rng, 2, c, 16, 16), c)
    s = class_swap(y, rng)
    for k in range(c):
        np.testing.assert_array_equal(s.tensor[:, k], y[:, s.permutation[k]])
        assert not np.array_equal(s.tensor[:, k], y[:, k])
    np.testing.assert_array_equal(s.tensor.sum(axis=1), 1.0)


def test_class_swap_needs_two_classes(rng):
    with pytest.raises(ContractViolation):
        class_swap(np.ones((1, 1, 2, 2)), rng)


# -- distances ----------------------------------------------------------------------------


def test_rmi_matching_beats_uniform():
    y, good = two_class_instance()
    cfg = LossConfig()
    assert rmi_distance(good, y, cfg).item() < rmi_distance(Tensor(np.zeros(y.shape)), y, cfg).item()


def test_cross_entropy_near_zero_when_saturated():
    y, good = two_class_instance()
    assert pixel_cross_entropy(good, y).item() < 1e-8


def test_rmi_gradcheck_complementary_channels(rng):
    half = rng.normal(size=(2, 1, 8, 8))
    x = Tensor(np.concatenate([half, -half], axis=1))
    y = one_hot(blob_mask(rng, 2, 2, 8, 8), 2)
    assert check_gradients(lambda: rmi_distance(x, y, LossConfig()), [x], rng) < 1e-4


def test_rmi_too_small_after_downsampling():
    with pytest.raises(ContractViolation):
        rmi_distance(Tensor(np.zeros((1, 2, 4, 4))), one_hot(np.zeros((1, 4, 4), dtype=int), 2), LossConfig())


@pytest.mark.parametrize("c", [2, 3, 6])
def test_ce_distance_uniform_is_log_c(c):
    u = Tensor(np.zeros((1, c, 2, 2)))
    assert ce_distance(u, u).item() == pytest.approx(math.log(c), abs=1e-12)


def test_ce_distance_saturated_near_zero():
    y, good = two_class_instance()
    assert ce_distance(good, Tensor(y * 40.0)).item() < 1e-8


def test_ce_distance_asymmetric(rng):
    a, r = Tensor(rng.normal(size=(1, 3, 4, 4))), Tensor(rng.normal(size=(1, 3, 4, 4)))
    assert abs(ce_distance(a, r).item() - ce_distance(r, a).item()) > 1e-3


def test_ce_distance_shape_mismatch():
    with pytest.raises(ContractViolation):
        ce_distance(Tensor(np.zeros((1, 2, 2, 2))), Tensor(np.zeros((1, 3, 2, 2))))


def test_loss_config_validation():
    for bad in (dict(margin=-1.0), dict(rmi_epsilon=0.0), dict(lambda_ce=0.7)):
        with pytest.raises(ContractViolation):
            LossConfig(**bad)


# -- aux net -----------------------------------------------------------------------------------


def test_aux_shapes(rng):
    net = build_auxnet(6, rng)
    taps = aux_forward(Tensor(rng.normal(size=(1, 6, 64, 64))), net)
    assert [t.shape[2:] for t in taps] == [(32, 32), (16, 16), (8, 8)]
    assert all(t.shape[1] == 6 for t in taps)


def test_aux_weight_sharing_and_pass_independence(rng):
    net = build_auxnet(3, rng)
    x = rng.normal(size=(1, 3, 16, 16))
    a = aux_forward(Tensor(x), net)
    b = aux_forward(Tensor(x.copy()), net)
    aux_forward(Tensor(rng.normal(size=x.shape)), net)  # an unrelated pass changes nothing
    c = aux_forward(Tensor(x), net)
    for u, v, w in zip(a, b, c):
        np.testing.assert_array_equal(u.data, v.data)
        np.testing.assert_array_equal(u.data, w.data)


def test_aux_rejects_indivisible(rng):
    with pytest.raises(ContractViolation):
        aux_forward(Tensor(np.zeros((1, 3, 12, 16))), build_auxnet(3, rng))


# -- triplet terms ----------------------------------------------------------------------------


def test_hinge_inactive():
    assert hinge(0.2, 1.5, 1.0).item() == 0.0


def test_hinge_arithmetic():
    assert hinge(0.2, 0.3, 1.0).item() == 0.9


def test_hinge_negative_margin_rejected():
    with pytest.raises(ContractViolation):
        hinge(0.0, 0.0, -0.1)


def test_identical_anchor_positive_uses_entropy_floor(rng):
    a = Tensor(rng.normal(size=(1, 3, 4, 4)))
    n = Tensor(rng.normal(size=(1, 3, 4, 4)))
    p = np.exp(a.data - a.data.max(axis=1, keepdims=True))
    p /= p.sum(axis=1, keepdims=True)
    floor = float(np.mean(-(p * np.log(p)).sum(axis=1)))  # d(a, a) is the mean entropy
    d_an = ce_distance(a, n).item()
    for margin in (0.0, 1.0, 3.0):
        got = triplet_term(ce_distance, a, a, n, margin).item()
        assert got == pytest.approx(max(margin + floor - d_an, 0.0), abs=1e-12)


def test_samcl_near_zero_when_saturated_with_zero_margin(rng):
    y, good = two_class_instance()
    neg = class_swap(y, rng)
    cfg = LossConfig(margin=0.0)
    assert samcl_loss(good, y, neg, build_auxnet(2, rng), cfg).item() < 1e-6


def test_swapping_positive_and_negative_increases_loss(rng):
    y, good = two_class_instance()
    neg = class_swap(y, rng).tensor
    net = build_auxnet(2, rng)
    cfg = LossConfig()
    assert samcl_loss(good, neg, y, net, cfg).item() > samcl_loss(good, y, neg, net, cfg).item()


@given(st.integers(0, 2**32 - 1), st.floats(0.0, 3.0))
def test_samcl_nonnegative(seed, margin):
    r = np.random.default_rng(seed)
    y = one_hot(blob_mask(r, 1, 3, 8, 8), 3)
    logits = Tensor(r.normal(0, 3, size=y.shape))
    assert samcl_loss(logits, y, class_swap(y, r), build_auxnet(3, r), LossConfig(margin=margin)).item() >= 0.0


def test_samcl_gradcheck_with_active_terms(rng):
    c = 3
    x = Tensor(rng.normal(size=(1, c, 16, 16)))
    y = one_hot(blob_mask(rng, 1, c, 16, 16), c)
    neg = class_swap(y, rng)
    net = build_auxnet(c, rng)
    cfg = LossConfig()
    terms = samcl_terms(x, y, neg, net, cfg)
    assert all(t.item() > 0 for t in terms), "every hinge must be active for the check to cover it"
    assert check_gradients(lambda: samcl_loss(x, y, neg, net, cfg), [x, *net.parameters()], rng) < 1e-4


def test_descent_on_logits_strictly_decreases(rng):
    c = 3
    y = one_hot(blob_mask(rng, 1, c, 8, 8), c)
    neg = class_swap(y, rng)
    net = build_auxnet(c, rng)
    cfg = LossConfig()
    x = Tensor(np.zeros(y.shape), requires_grad=True)
    values = []
    for _ in range(50):
        x.grad = None
        loss = samcl_loss(x, y, neg, net, cfg)
        values.append(loss.item())
        loss.backward()
        x.data -= 0.5 * x.grad
    assert all(b < a for a, b in zip(values, values[1:])), values
