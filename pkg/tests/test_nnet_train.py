import numpy as np
import pytest

from hexsr import nnet
from hexsr.errors import DivergenceError, EmptyTrainingSetError
from hexsr.nnet.losses import loss
from hexsr.nnet.train import _lr_at
from hexsr.synthetic import blobs_image

TINY = nnet.RestorerConfig(
    groups=1, blocks_per_group=1, feature_channels=4, attention_reduction=4,
    scale=2, use_distance_head=False, dtype="float64",
)


def _samples(n=2, size=24, seed=0):
    out = []
    for i in range(n):
        hr = blobs_image(size, seed=seed + i).values
        out.append(nnet.TrainSample(inputs=hr[:, ::2, ::2], target=hr))
    return out


def test_zero_learning_rate_freezes_parameters():
    samples = _samples()
    model = nnet.Restorer(TINY, seed=1)
    before = [p.value.copy() for p in model.parameters()]
    nnet.train(TINY, samples, [], steps=20, batch_size=2, patch=8, lr=0.0,
               milestones=(5, 10), seed=0, val_interval=10, model=model)
    for p, b in zip(model.parameters(), before):
        assert np.array_equal(p.value, b)


def test_halving_schedule():
    assert _lr_at(1, 1e-4, (120, 160)) == 1e-4
    assert _lr_at(120, 1e-4, (120, 160)) == 5e-5
    assert _lr_at(159, 1e-4, (120, 160)) == 5e-5
    assert _lr_at(160, 1e-4, (120, 160)) == 2.5e-5
    res = nnet.train(TINY, _samples(), [], steps=6, batch_size=1, patch=8,
                     lr=1e-3, milestones=(3, 5), seed=0, val_interval=2)
    lrs = [row[1] for row in res.curve]
    assert lrs == [1e-3, 5e-4, 2.5e-4]


def test_training_determinism():
    runs = []
    for _ in range(2):
        res = nnet.train(TINY, _samples(), [], steps=30, batch_size=2, patch=8,
                         lr=1e-3, seed=42, val_interval=10)
        runs.append([p.value.copy() for p in res.model.parameters()])
    for a, b in zip(*runs):
        assert np.array_equal(a, b)


def test_single_patch_overfit_reaches_half_du():
    # memorize one 32x32 -> 64x64 pair to below 0.5 DU Charbonnier
    hr = blobs_image(64, seed=9).values
    sample = nnet.TrainSample(inputs=hr[:, ::2, ::2], target=hr)
    cfg = nnet.RestorerConfig(
        groups=1, blocks_per_group=1, feature_channels=16, attention_reduction=4,
        scale=2, use_distance_head=False, dtype="float32",
    )
    res = nnet.train(cfg, [sample], [], steps=2000, batch_size=1, patch=32,
                     lr=1e-2, milestones=(800, 1200, 1600),
                     loss_kind="charbonnier", seed=0, val_interval=500)
    y = res.model.forward(sample.inputs[None].astype(np.float32))
    final = loss("charbonnier", sample.target[None].astype(np.float32), y)[0]
    assert final < 0.5


def test_divergence_raises():
    with pytest.raises(DivergenceError):
        nnet.train(TINY, _samples(), [], steps=200, batch_size=2, patch=8,
                   lr=1e8, seed=0, val_interval=50)


def test_empty_training_set():
    with pytest.raises(EmptyTrainingSetError):
        nnet.train(TINY, [], [], steps=1)


def test_best_validation_selection():
    samples = _samples(3)
    res = nnet.train(TINY, samples[:2], samples[2:], steps=60, batch_size=2,
                     patch=8, lr=1e-3, seed=3, val_interval=20)
    vals = [row[3] for row in res.curve]
    assert res.best_val_psnr == max(vals)
    assert res.best_step in [row[0] for row in res.curve]


def test_curve_csv_export(tmp_path):
    res = nnet.train(TINY, _samples(), [], steps=4, batch_size=1, patch=8,
                     lr=1e-3, seed=0, val_interval=2)
    path = tmp_path / "curve.csv"
    nnet.export_curve_csv(res.curve, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "step,lr,train_loss,val_psnr_y"
    assert len(lines) == len(res.curve) + 1
