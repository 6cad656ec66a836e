import numpy as np
import pytest

from salattn.autodiff import Tensor, grad_check, make_rng, no_grad
from salattn.losses import recurrent_loss, stage1_loss
from salattn.pgm import LocalizationNet, generate_patch_bag
from salattn.ram import ConvGRUCell, RecurrentAttention
from salattn.sampler import CropBox
from salattn.spm import BackboneConfig, DecodeHead, SaliencyBackbone

from oracles import bilinear_point, scalar_gru


# -- SPM -----------------------------------------------------------------------
@pytest.fixture(scope="module")
def backbone():
    return SaliencyBackbone(BackboneConfig(), make_rng(0))


def test_spm_shapes(backbone):
    with no_grad():
        assert backbone(Tensor(np.zeros((1, 3, 64, 64)))).shape == (1, 64, 8, 8)
        assert backbone(Tensor(np.zeros((2, 3, 128, 96)))).shape == (2, 64, 16, 12)
    with pytest.raises(ValueError):
        backbone(Tensor(np.zeros((1, 3, 60, 64))))
    with pytest.raises(ValueError):
        BackboneConfig(feature_channels=30)


def _rf_radius(dil4, dil5):
    net = SaliencyBackbone(BackboneConfig(base_channels=2, dilation4=dil4, dilation5=dil5, feature_channels=8),
                           make_rng(1))
    rng = np.random.default_rng(0)
    img = rng.uniform(size=(1, 3, 256, 256))
    with no_grad():
        base = net(Tensor(img)).data
        img2 = img.copy()
        img2[0, :, 128, 128] += 5.0
        moved = np.abs(net(Tensor(img2)).data - base).max(axis=(0, 1)) > 0
    rows, cols = np.nonzero(moved)
    assert moved[16, 16]
    return max(np.abs(rows - 16).max(), np.abs(cols - 16).max())


def test_dilation_widens_receptive_field():
    assert _rf_radius(2, 4) > _rf_radius(1, 1)


def test_dilated_blocks_preserve_resolution(backbone):
    x = Tensor(np.random.default_rng(0).normal(size=(1, 32, 8, 8)))
    with no_grad():
        for block, d in (("b4", 2), ("b5", 4)):
            for i in range(3):
                x = backbone.conv(f"{block}.conv{i}", x, padding=d, dilation=d)
                assert x.shape[2:] == (8, 8)


def test_decode_head(backbone):
    head = DecodeHead(64, make_rng(2))
    head.params["conv2.weight"].data[:] = 0.0
    head.params["conv2.bias"].data[:] = 0.37
    with no_grad():
        out = head(backbone(Tensor(np.random.default_rng(0).uniform(size=(1, 3, 64, 64)))))
    assert out.shape == (1, 1, 8, 8)
    assert np.all(out.data == 0.37)
    with pytest.raises(ValueError):
        head(Tensor(np.zeros((1, 32, 8, 8))))


def test_stage1_gradient_reaches_every_parameter():
    net = SaliencyBackbone(BackboneConfig(base_channels=4, feature_channels=16), make_rng(3))
    head = DecodeHead(16, make_rng(4))
    rng = np.random.default_rng(1)
    img = Tensor(rng.uniform(size=(2, 3, 32, 32)))
    target = (rng.uniform(size=(2, 1, 4, 4)) > 0.5).astype(float)
    stage1_loss(head(net(img)), target).backward()
    for name, p in list(net.named_parameters()) + list(head.named_parameters("head.")):
        assert p.grad is not None and np.any(p.grad != 0), name


# -- PGM -----------------------------------------------------------------------
@pytest.fixture(scope="module")
def locnet():
    return LocalizationNet(4, make_rng(5), loc_size=32, channels=8, hidden=32)


def test_zero_heads_give_centered_boxes(locnet):
    net = LocalizationNet(4, make_rng(6), loc_size=32, channels=8, hidden=32)
    for k in range(4):
        net.params[f"head{k}.weight"].data[:] = 0
        net.params[f"head{k}.bias"].data[:] = 0
    with no_grad():
        boxes = net(Tensor(np.random.default_rng(0).uniform(size=(1, 3, 48, 40)))).values
    np.testing.assert_allclose(boxes[0], np.tile([0.1, 0.1, 0.9, 0.9], (4, 1)), atol=1e-15)


def test_boxes_satisfy_constraint_for_random_params():
    rng = np.random.default_rng(7)
    for s in range(20):
        net = LocalizationNet(3, make_rng(100 + s), loc_size=16, channels=4, hidden=16)
        for name, p in net.named_parameters():
            p.data = rng.normal(scale=3.0, size=p.shape)
        with no_grad():
            box = net(Tensor(rng.uniform(size=(2, 3, 24, 24))))
        box.validate()
        assert box.values.shape == (2, 3, 4)


def test_heads_differ_trunk_shared(locnet):
    img = Tensor(np.random.default_rng(1).uniform(size=(1, 3, 32, 32)))
    with no_grad():
        feat = locnet.trunk(img).data
        boxes = locnet(img).values[0]
        for k in range(4):
            w, b = locnet.params[f"head{k}.weight"].data, locnet.params[f"head{k}.bias"].data
            raw = feat[0] @ w.T + b
            s = 1 / (1 + np.exp(-raw))
            width = 0.6 + 0.4 * s[2]
            assert boxes[k, 0] == pytest.approx(s[0] * (1 - width), abs=1e-12)
    assert np.linalg.norm(boxes[0] - boxes[1]) > 0
    with pytest.raises(ValueError):
        locnet(Tensor(np.zeros((1, 1, 32, 32))))


def test_patch_bag_layout():
    rng = np.random.default_rng(2)
    img = Tensor(rng.uniform(size=(1, 3, 16, 16)))
    raw = Tensor(rng.normal(size=(4, 4)))
    from salattn.sampler import crop_from_raw
    bag = generate_patch_bag(img, crop_from_raw(raw))
    assert len(bag) == 5 and bag.images.shape == (5, 3, 16, 16)
    np.testing.assert_array_equal(bag.images.data[0], img.data[0])


def test_patch_bag_widest_box_is_resized_original():
    img = np.random.default_rng(3).uniform(size=(1, 3, 16, 16))
    bag = generate_patch_bag(Tensor(img), CropBox.fixed(0, 0, 1, 1))
    assert np.max(np.abs(bag.images.data[1] - img[0])) < 1e-12


def test_patch_bag_matches_formula_oracle():
    yy, xx = np.mgrid[0:8, 0:8]
    img = np.stack([xx + 8 * yy, xx * 0.5, yy * 2.0]).astype(float)[None]
    bag = generate_patch_bag(Tensor(img), CropBox.fixed(0.1, 0.1, 0.9, 0.9))
    patch = bag.images.data[1]
    for c in range(3):
        for i in range(8):
            for j in range(8):
                v = (0.1 + 0.8 * i / 7) * 7
                u = (0.1 + 0.8 * j / 7) * 7
                assert abs(patch[c, i, j] - bilinear_point(img[0, c], v, u)) < 1e-12


def test_patch_gradient_reaches_head_and_trunk(locnet):
    locnet.zero_grad()
    img = Tensor(np.random.default_rng(4).uniform(size=(1, 3, 32, 32)))
    boxes = locnet(img)
    bag = generate_patch_bag(img, CropBox(boxes.coords[0], boxes.eps))
    probe = np.random.default_rng(5).normal(size=(3, 32, 32))
    (bag.images[2] * probe).sum().backward()
    assert np.any(locnet.params["head1.weight"].grad != 0)
    assert np.any(locnet.params["conv1.weight"].grad != 0)
    assert locnet.params["head0.weight"].grad is None or not np.any(locnet.params["head0.weight"].grad)
    locnet.zero_grad()


# -- RAM -----------------------------------------------------------------------
def _cell(cin=2, hid=3, seed=0):
    return ConvGRUCell(cin, hid, make_rng(seed))


def test_gru_zero_params_halves_state():
    cell = _cell()
    for p in cell.parameters():
        p.data[:] = 0
    rng = np.random.default_rng(0)
    h = rng.uniform(-1, 1, size=(1, 3, 4, 4))
    out = cell.step(Tensor(rng.normal(size=(1, 2, 4, 4))), Tensor(h)).data
    np.testing.assert_array_equal(out, 0.5 * h)


def test_gru_shut_update_gate_keeps_state():
    cell = _cell()
    for p in cell.parameters():
        p.data[:] = 0
    cell.params["b_z"].data[:] = -100.0
    h = np.random.default_rng(1).uniform(-1, 1, size=(1, 3, 4, 4))
    out = cell.step(Tensor(np.ones((1, 2, 4, 4))), Tensor(h)).data
    np.testing.assert_allclose(out, h, atol=1e-40)


def test_gru_matches_scalar_oracle():
    rng = np.random.default_rng(2)
    for _ in range(20):
        cell = ConvGRUCell(1, 1, make_rng(0))
        vals = {}
        for g in ("z", "r", "h"):
            for kind in ("W", "U", "b"):
                v = rng.normal()
                vals[f"{kind.lower()}{g}"] = v
                p = cell.params[f"{kind}_{g}"]
                p.data[:] = 0
                p.data.reshape(-1)[p.size // 2] = v  # kernel centre; the only tap that sees a 1x1 map
        x, h = rng.normal(), rng.uniform(-1, 1)
        got = cell.step(Tensor([[[[x]]]]), Tensor([[[[h]]]])).data.item()
        assert abs(got - scalar_gru(x, h, vals)) < 1e-12


def test_gru_gates_open_interval_and_bounded_state():
    cell = _cell(seed=3)
    rng = np.random.default_rng(3)
    # pre-activations stay well below the ~37 where float64 logistic rounds to 1
    for p in cell.parameters():
        p.data = rng.normal(scale=0.5, size=p.shape)
    h = cell.zero_state(1, 5, 5)
    for _ in range(6):
        x = Tensor(rng.normal(scale=1.5, size=(1, 2, 5, 5)))
        z, r = cell.gates(x, h)
        assert np.all((z > 0) & (z < 1)) and np.all((r > 0) & (r < 1))
        h = cell.step(x, h)
        assert np.all(np.abs(h.data) <= 1.0)


def test_gru_shape_errors():
    cell = _cell()
    with pytest.raises(ValueError):
        cell.step(Tensor(np.zeros((1, 3, 4, 4))), cell.zero_state(1, 4, 4))
    with pytest.raises(ValueError):
        cell.step(Tensor(np.zeros((1, 2, 4, 4))), cell.zero_state(1, 5, 4))


@pytest.fixture(scope="module")
def ram():
    return RecurrentAttention(4, make_rng(8), hidden_channels=3)


def _feats(n, seed=0):
    rng = np.random.default_rng(seed)
    return [Tensor(rng.normal(size=(1, 4, 4, 4))) for _ in range(n)]


def test_rollout_lengths(ram):
    with no_grad():
        assert len(ram.rollout(_feats(5))) == 5
        single = ram.rollout(_feats(1))
    assert len(single) == 1 and single[0].shape == (1, 1, 4, 4)
    with pytest.raises(ValueError):
        ram.rollout([])


def test_rollout_single_step_is_one_pass(ram):
    f = _feats(1)[0]
    with no_grad():
        zero = ram.encoder.zero_state(1, 4, 4)
        h_enc = ram.encoder.step(f, zero)
        h_dec = ram.decoder.step(h_enc, ram.decoder.zero_state(1, 4, 4))
        want = ram.conv("head", h_dec).data
        got = ram.rollout([f])[0].data
    np.testing.assert_array_equal(got, want)


def test_rollout_causality_and_permutation(ram):
    feats = _feats(5, seed=1)
    with no_grad():
        base = [p.data for p in ram.rollout(feats)]
        perm = [feats[0], feats[3], feats[1], feats[4], feats[2]]
        swapped = [p.data for p in ram.rollout(perm)]
        bumped = feats[:3] + [Tensor(feats[3].data + 1.0), feats[4]]
        later = [p.data for p in ram.rollout(bumped)]
    np.testing.assert_array_equal(swapped[0], base[0])
    assert not np.allclose(swapped[-1], base[-1])
    for k in range(3):
        np.testing.assert_array_equal(later[k], base[k])
    assert not np.allclose(later[3], base[3])


def test_rollout_gradcheck_three_steps():
    ram = RecurrentAttention(2, make_rng(9), hidden_channels=2, kernel=3)
    rng = np.random.default_rng(4)
    feats = [Tensor(rng.normal(size=(1, 2, 3, 3))) for _ in range(3)]
    target = (rng.uniform(size=(1, 1, 3, 3)) > 0.5).astype(float)
    for name in ("enc.W_z", "enc.U_h", "dec.b_r", "head.weight"):
        p = dict(ram.named_parameters())[name]
        assert grad_check(lambda _p: recurrent_loss(ram.rollout(feats), target, 2), p).passed, name
    assert grad_check(lambda f1: recurrent_loss(ram.rollout([feats[0], f1, feats[2]]), target, 2),
                      feats[1]).passed
