import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from salattn.autodiff import Tensor, grad_check, logistic
from salattn.losses import (LossConfig, bce_loss, iou_loss, recurrent_loss, stage1_loss, step_weights,
                            weighted_step_sum)
from salattn.metrics import evaluate_map, fbeta, mae, max_fbeta, pr_at_threshold

from oracles import bce_naive, mae_loop, max_fbeta_loop, pr_loop


# -- bce -----------------------------------------------------------------------
def test_bce_known_values():
    assert bce_loss(Tensor([0.0]), np.array([1.0])).item() == pytest.approx(math.log(2), abs=1e-15)
    assert bce_loss(Tensor([100.0]), np.array([1.0])).item() < 1e-40


def test_bce_matches_naive():
    rng = np.random.default_rng(0)
    x = rng.normal(scale=3, size=(4, 4))
    t = rng.uniform(size=(4, 4))
    assert abs(bce_loss(Tensor(x), t).item() - bce_naive(x, t)) < 1e-10


def test_bce_stable_at_huge_logits():
    x = np.array([1e4, -1e4, 1e4, -1e4])
    t = np.array([1.0, 0.0, 0.0, 1.0])
    v = bce_loss(Tensor(x), t).item()
    assert np.isfinite(v) and v == pytest.approx(1e4 / 2, rel=1e-12)


def test_bce_errors():
    with pytest.raises(ValueError):
        bce_loss(Tensor(np.zeros(3)), np.zeros(4))
    with pytest.raises(ValueError):
        bce_loss(Tensor(np.zeros(2)), np.array([0.5, 1.2]))


# -- iou -----------------------------------------------------------------------
def test_iou_identical_binary():
    t = np.array([[1.0, 0.0], [1.0, 1.0]])
    assert iou_loss(Tensor(t), t).item() < 1e-6


def test_iou_hand_value():
    assert iou_loss(Tensor(np.full(4, 0.5)), np.ones(4)).item() == pytest.approx(0.5, abs=1e-6)


def test_iou_disjoint():
    assert iou_loss(Tensor([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 1.0])).item() == pytest.approx(1.0, abs=1e-6)


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, 12, elements=st.floats(0, 1)), arrays(np.int8, 12, elements=st.integers(0, 1)),
       st.floats(0, 1))
def test_iou_bounded_and_monotone(p, t, frac):
    t = t.astype(float)
    base = iou_loss(Tensor(p), t).item()
    assert 0.0 <= base <= 1.0
    closer = p + frac * (t - p)  # shrink every |p - t| pointwise
    assert iou_loss(Tensor(closer), t).item() <= base + 1e-12


# -- stage-1 -------------------------------------------------------------------
def test_stage1_reduces_to_bce():
    rng = np.random.default_rng(1)
    x, t = rng.normal(size=(3, 3)), rng.uniform(size=(3, 3))
    cfg = LossConfig(lambda_ce=1.0, lambda_iou=0.0)
    assert stage1_loss(Tensor(x), t, cfg).item() == bce_loss(Tensor(x), t).item()


def test_stage1_perfect_prediction():
    t = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert stage1_loss(Tensor((t * 2 - 1) * 60), t).item() < 1e-6


def test_stage1_compositional():
    rng = np.random.default_rng(2)
    x, t = rng.normal(size=(5, 5)), rng.uniform(size=(5, 5))
    cfg = LossConfig(lambda_ce=0.7, lambda_iou=1.3)
    want = 0.7 * bce_loss(Tensor(x), t).item() + 1.3 * iou_loss(logistic(Tensor(x)), t).item()
    assert stage1_loss(Tensor(x), t, cfg).item() == pytest.approx(want, abs=1e-14)


# -- recurrent loss ------------------------------------------------------------
def test_recurrent_uniform_ce():
    assert weighted_step_sum([Tensor([1.0])] * 5, 2).item() == 1.9375
    assert weighted_step_sum([Tensor([1.0])] * 3, 1).item() == 3.0


@pytest.mark.parametrize("k,n", [(2, 4), (3, 2), (1.5, 6), (1, 0)])
def test_recurrent_closed_form(k, n):
    rng = np.random.default_rng(3)
    x, t = rng.normal(size=(2, 2)), rng.uniform(size=(2, 2))
    c = bce_loss(Tensor(x), t).item()
    got = recurrent_loss([Tensor(x) for _ in range(n + 1)], t, k).item()
    closed = c * sum(k ** (i + 1) for i in range(n + 1)) / k ** (n + 1)
    assert got == pytest.approx(closed, rel=1e-13)


def test_recurrent_gradient_ratio():
    rng = np.random.default_rng(4)
    x, t = rng.normal(size=(3, 3)), rng.uniform(size=(3, 3))
    preds = [Tensor(x, requires_grad=True) for _ in range(5)]
    recurrent_loss(preds, t, 2).backward()
    for a, b in zip(preds, preds[1:]):
        np.testing.assert_allclose(b.grad / a.grad, 2.0, atol=1e-10)


def test_recurrent_empty():
    with pytest.raises(ValueError):
        recurrent_loss([], np.zeros(1))


def test_step_weights_are_geometric():
    w = step_weights(5, 2.0)
    assert w.tolist() == [2 / 32, 4 / 32, 8 / 32, 16 / 32, 32 / 32]


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_loss_gradients(seed):
    rng = np.random.default_rng(seed)
    t = rng.uniform(size=(2, 3))
    assert grad_check(lambda x: bce_loss(x, t), Tensor(rng.normal(size=(2, 3)))).passed
    assert grad_check(lambda p: iou_loss(p, t), Tensor(rng.uniform(0.1, 0.9, size=(2, 3)))).passed
    others = [Tensor(rng.normal(size=(2, 3))) for _ in range(2)]
    assert grad_check(lambda x: recurrent_loss([others[0], x, others[1]], t, 2),
                      Tensor(rng.normal(size=(2, 3)))).passed


# -- metrics -------------------------------------------------------------------
def test_mae_basic():
    gt = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert mae(gt, gt) == 0.0
    assert mae(np.ones((3, 3)), np.zeros((3, 3))) == 1.0
    with pytest.raises(ValueError):
        mae(np.ones(3), np.ones(4))


def test_metrics_match_loop_oracles():
    rng = np.random.default_rng(5)
    for _ in range(10):
        pred = rng.uniform(size=(16, 16))
        gt = (rng.uniform(size=(16, 16)) > 0.6).astype(float)
        assert mae(pred, gt) == mae_loop(pred, gt)
        assert pr_at_threshold(pred, gt, 0.5) == pr_loop(pred, gt, 0.5)
        assert max_fbeta(pred, gt) == max_fbeta_loop(pred, gt)


def test_pr_degenerate_conventions():
    gt = np.array([[1.0, 0.0], [1.0, 1.0]])
    assert pr_at_threshold(gt, gt, 0.3) == (1.0, 1.0)
    assert pr_at_threshold(np.zeros((2, 2)), gt, 0.5) == (0.0, 0.0)


def test_fbeta_values():
    gt = np.array([[1.0, 0.0, 1.0, 1.0]])
    assert max_fbeta(gt, gt) == 1.0
    assert fbeta(0.8, 0.5, 0.3) == pytest.approx(0.52 / 0.74, abs=1e-12)
    assert round(fbeta(0.8, 0.5, 0.3), 5) == 0.70270


def test_max_over_sweep_dominates_single():
    rng = np.random.default_rng(6)
    pred = rng.uniform(size=(8, 8))
    gt = (rng.uniform(size=(8, 8)) > 0.5).astype(float)
    rep = evaluate_map(pred, gt)
    assert rep.max_fbeta >= fbeta(*pr_at_threshold(pred, gt, 0.5))
    assert rep.precision.shape == rep.recall.shape == (256,)
    assert 0 <= rep.mae <= 1 and 0 <= rep.max_fbeta <= 1
