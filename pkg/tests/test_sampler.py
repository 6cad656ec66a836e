import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from salattn.autodiff import Tensor, bilinear_resize, grad_check
from salattn.sampler import (CropBox, crop_and_resize, crop_from_raw, grid_sample_bilinear, identity_grid,
                             make_grid)

from oracles import bilinear_point


def test_crop_from_zero_raw():
    box = crop_from_raw(Tensor(np.zeros(4)), 0.6)
    np.testing.assert_allclose(box.values, [0.1, 0.1, 0.9, 0.9], atol=1e-15)


def test_crop_limit_full_extent():
    box = crop_from_raw(Tensor([0.0, 0.0, 60.0, 60.0]), 0.6)
    x1, y1, x2, y2 = box.values
    assert x2 - x1 == pytest.approx(1.0, abs=1e-12)
    assert y2 - y1 == pytest.approx(1.0, abs=1e-12)


def test_crop_rejects_bad_eps():
    for eps in (0.0, 1.0, -0.2, 1.5):
        with pytest.raises(ValueError):
            crop_from_raw(Tensor(np.zeros(4)), eps)


def test_crop_property_sweep():
    rng = np.random.default_rng(0)
    raw = rng.normal(scale=5.0, size=(1000, 4))
    v = crop_from_raw(Tensor(raw), 0.6).values
    x1, y1, x2, y2 = v.T
    assert np.all(x2 - x1 >= 0.6) and np.all(y2 - y1 >= 0.6)
    assert np.all(x1 >= 0) and np.all(y1 >= 0) and np.all(x2 <= 1) and np.all(y2 <= 1)
    assert np.all(x1 < x2) and np.all(y1 < y2)


def test_crop_extent_survives_rounding_when_saturated():
    # saturated width gates hit the floor exactly; x2 - x1 must not round below eps
    rng = np.random.default_rng(1)
    raw = rng.normal(scale=200.0, size=(200000, 4))
    x1, y1, x2, y2 = crop_from_raw(Tensor(raw), 0.6).values.T
    assert np.count_nonzero(x2 - x1 < 0.6) + np.count_nonzero(y2 - y1 < 0.6) == 0
    assert x1.min() >= 0 and x2.max() <= 1


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-40, 40), min_size=4, max_size=4), st.floats(0.05, 0.95))
def test_crop_constraint_holds_for_any_raw(raw, eps):
    crop_from_raw(Tensor(raw), eps).validate()


def test_grid_identity_lattice():
    g = make_grid(CropBox.fixed(0, 0, 1, 1), 4, 5, 4, 5).data[0]
    np.testing.assert_array_equal(g, identity_grid(4, 5).data[0])


def test_grid_corners_align():
    g = make_grid(CropBox.fixed(0, 0, 1, 1), 2, 2, 3, 3).data[0]
    assert g[0, 0].tolist() == [0, 0] and g[0, 1].tolist() == [2, 0]
    assert g[1, 0].tolist() == [0, 2] and g[1, 1].tolist() == [2, 2]


def test_grid_extremes_equal_box_corners():
    rng = np.random.default_rng(5)
    for _ in range(20):
        box = crop_from_raw(Tensor(rng.normal(size=4)), 0.6)
        x1, y1, x2, y2 = box.values
        g = make_grid(box, 6, 9, 20, 30).data[0]
        assert abs(g[..., 0].min() - x1 * 29) < 1e-12 and abs(g[..., 0].max() - x2 * 29) < 1e-12
        assert abs(g[..., 1].min() - y1 * 19) < 1e-12 and abs(g[..., 1].max() - y2 * 19) < 1e-12


def test_sample_identity_grid_exact():
    img = np.random.default_rng(1).normal(size=(1, 3, 32, 32))
    out = grid_sample_bilinear(Tensor(img), identity_grid(32, 32)).data
    assert np.max(np.abs(out - img)) < 1e-12


def test_sample_corner_example():
    img = np.arange(9.0).reshape(1, 1, 3, 3)
    out = crop_and_resize(Tensor(img), CropBox.fixed(0, 0, 1, 1), 2, 2).data[0, 0]
    assert out.tolist() == [[0.0, 2.0], [6.0, 8.0]]


def test_sample_matches_point_oracle():
    rng = np.random.default_rng(2)
    img = rng.normal(size=(1, 2, 7, 9))
    grid = rng.uniform(-1.0, 10.0, size=(1, 4, 5, 2))
    out = grid_sample_bilinear(Tensor(img), Tensor(grid)).data
    for c in range(2):
        for i in range(4):
            for j in range(5):
                u, v = grid[0, i, j]
                assert abs(out[0, c, i, j] - bilinear_point(img[0, c], v, u)) < 1e-12


def test_sample_within_source_range():
    rng = np.random.default_rng(3)
    img = rng.uniform(-2, 3, size=(1, 1, 10, 10))
    for _ in range(10):
        box = crop_from_raw(Tensor(rng.normal(size=4)), 0.6)
        out = crop_and_resize(Tensor(img), box, 13, 7).data
        assert out.min() >= img.min() - 1e-12 and out.max() <= img.max() + 1e-12


def test_crop_then_resize_equals_resize():
    img = np.random.default_rng(4).normal(size=(1, 3, 8, 6))
    a = crop_and_resize(Tensor(img), CropBox.fixed(0, 0, 1, 1), 11, 5).data
    b = bilinear_resize(Tensor(img), 11, 5).data
    assert np.max(np.abs(a - b)) < 1e-12


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_end_to_end_gradient_wrt_raw(seed):
    rng = np.random.default_rng(seed)
    img = Tensor(rng.normal(size=(1, 2, 9, 8)))
    probe = rng.normal(size=(1, 2, 5, 6))

    def f(raw):
        return (crop_and_resize(img, crop_from_raw(raw, 0.6), 5, 6) * probe).sum()

    assert grad_check(f, Tensor(rng.normal(size=4)), h=1e-5, tol=1e-4).passed


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_gradient_wrt_image(seed):
    rng = np.random.default_rng(seed)
    box = crop_from_raw(Tensor(rng.normal(size=4)), 0.6)
    probe = rng.normal(size=(1, 1, 4, 4))
    f = lambda im: (crop_and_resize(im, box, 4, 4) * probe).sum()
    assert grad_check(f, Tensor(rng.normal(size=(1, 1, 6, 6)))).passed


def test_batched_boxes_share_image():
    rng = np.random.default_rng(9)
    img = rng.normal(size=(1, 3, 8, 8))
    raw = rng.normal(size=(3, 4))
    batched = crop_and_resize(Tensor(img), crop_from_raw(Tensor(raw)), 5, 5).data
    for k in range(3):
        single = crop_and_resize(Tensor(img), crop_from_raw(Tensor(raw[k])), 5, 5).data[0]
        np.testing.assert_allclose(batched[k], single, atol=1e-15)
