import numpy as np
import pytest

from hexsr import nnet
from hexsr.errors import MissingDistanceError, ShapeMismatchError
from hexsr.observe import RasterImage
from hexsr.resample import DistanceMatrix
from hexsr.sampling import RectGrid


def _tiny(scale=2, dist=True, seed=0, mean_shift=128.0):
    cfg = nnet.RestorerConfig(
        groups=1, blocks_per_group=1, feature_channels=4, attention_reduction=4,
        scale=scale, use_distance_head=dist, mean_shift=mean_shift,
    )
    return nnet.Restorer(cfg, seed=seed)


def test_forward_shape_law():
    rng = np.random.default_rng(0)
    for scale in (2, 4):
        for h, w in ((8, 8), (6, 10), (7, 9)):
            model = _tiny(scale=scale, dist=False)
            x = rng.uniform(0, 255, (2, 3, h, w))
            y = model.forward(x)
            assert y.shape == (2, 3, scale * h, scale * w)


def test_forward_requires_distance_when_head_enabled():
    model = _tiny(dist=True)
    x = np.zeros((1, 3, 8, 8))
    with pytest.raises(MissingDistanceError):
        model.forward(x)
    with pytest.raises(ShapeMismatchError):
        model.forward(x, np.zeros((1, 1, 4, 4)))


def test_forward_rejects_bad_input_shape():
    model = _tiny(dist=False)
    with pytest.raises(ShapeMismatchError):
        model.forward(np.zeros((1, 1, 8, 8)))


def test_zero_body_long_skip_identity():
    model = _tiny(dist=False, mean_shift=0.0)
    for grp in model.groups:
        for blk in grp.blocks:
            for p in blk.parameters():
                p.value[...] = 0.0
        for p in grp.tail.parameters():
            p.value[...] = 0.0
    for p in model.conv_lsc.parameters():
        p.value[...] = 0.0
    x = np.random.default_rng(1).uniform(0, 255, (1, 3, 6, 6))
    f0 = model.head.forward(x)
    t = f0
    for grp in model.groups:
        t = grp.forward(t)
    fdf = f0 + model.conv_lsc.forward(t)
    assert np.array_equal(fdf, f0)


def test_zero_tail_gives_zero_output():
    # with a zeroed upsampler and output conv the whole output vanishes
    model = _tiny(dist=False, mean_shift=0.0)
    for conv, _ in model.up_stages:
        for p in conv.parameters():
            p.value[...] = 0.0
    for p in model.conv_out.parameters():
        p.value[...] = 0.0
    x = np.random.default_rng(2).uniform(0, 255, (1, 3, 8, 8))
    assert np.array_equal(model.forward(x), np.zeros((1, 3, 16, 16)))


def test_distance_head_dead_path_gradients():
    # zero mask on the distance-head output kills its gradient by the chain rule
    model = _tiny(dist=True)
    d = np.random.default_rng(3).uniform(0, 2.5, (1, 1, 8, 8))
    feats = model._dist_features(d)
    mask = np.zeros_like(feats)
    _ = feats * mask
    upstream = mask * np.ones_like(feats)  # dL/d(feats) through the zero mask
    for conv in model.dist_convs:
        for p in conv.parameters():
            p.zero_grad()
    g = model.dist_convs[2].backward(upstream)
    g = model.dist_relus[1].backward(g)
    g = model.dist_convs[1].backward(g)
    g = model.dist_relus[0].backward(g)
    model.dist_convs[0].backward(g)
    for conv in model.dist_convs:
        for p in conv.parameters():
            assert np.all(p.grad == 0.0), p.name


def test_compute_gradients_zero_loss_gives_zero_grads():
    model = _tiny(dist=False)
    x = np.random.default_rng(4).uniform(0, 255, (1, 3, 8, 8))
    y = model.forward(x)
    batch = nnet.TrainBatch(inputs=x, targets=y)
    value, grads = nnet.compute_gradients(model, batch, "mse")
    assert value == 0.0
    for name, g in grads.items():
        assert np.all(g == 0.0), name


def test_init_determinism():
    a = _tiny(seed=7)
    b = _tiny(seed=7)
    for pa, pb in zip(a.parameters(), b.parameters()):
        assert np.array_equal(pa.value, pb.value)
    c = _tiny(seed=8)
    assert any(
        not np.array_equal(pa.value, pc.value)
        for pa, pc in zip(a.parameters(), c.parameters())
    )


def test_checkpoint_roundtrip(tmp_path):
    model = _tiny(dist=True, seed=5)
    rng = np.random.default_rng(6)
    for p in model.parameters():
        p.value += rng.normal(0, 0.01, p.value.shape)
    path = tmp_path / "model.ckpt"
    nnet.save_checkpoint(model, path, step=123, extra={"note": "unit"})
    back, meta = nnet.load_checkpoint(path)
    assert meta["step"] == "123"
    assert meta["note"] == "unit"
    assert back.config == model.config
    for pa, pb in zip(model.parameters(), back.parameters()):
        assert pa.name == pb.name
        assert np.array_equal(pa.value, pb.value)
    x = rng.uniform(0, 255, (1, 3, 8, 8))
    d = rng.uniform(0, 2.5, (1, 1, 8, 8))
    assert np.array_equal(model.forward(x, d), back.forward(x, d))


def test_forward_wrapper_halves_pitch():
    model = _tiny(dist=True)
    img = RasterImage(np.random.default_rng(8).uniform(0, 255, (3, 8, 8)), 2.0)
    dm = DistanceMatrix(np.random.default_rng(9).uniform(0, 2, (8, 8)), RectGrid(2.0, 8, 8))
    out = nnet.forward(model, img, dm)
    assert out.pitch == 1.0
    assert out.values.shape == (3, 16, 16)


def test_train_batch_validation():
    with pytest.raises(ShapeMismatchError):
        nnet.TrainBatch(np.zeros((2, 3, 8, 8)), np.zeros((2, 3, 15, 16)))
    with pytest.raises(ShapeMismatchError):
        nnet.TrainBatch(
            np.zeros((2, 3, 8, 8)), np.zeros((2, 3, 16, 16)), np.zeros((2, 1, 4, 4))
        )
    b = nnet.TrainBatch(np.zeros((2, 3, 8, 8)), np.zeros((2, 3, 32, 32)))
    assert b.scale == 4
