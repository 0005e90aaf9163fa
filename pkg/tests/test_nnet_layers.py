"""Finite-difference validation of every layer type and the losses."""

import numpy as np
import pytest

from hexsr import nnet
from hexsr.errors import ShapeMismatchError
from hexsr.nnet.losses import loss

H = 1e-3
TOL = 1e-4


def _rng(seed=0):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def _fd_check(fwd, arrays, analytic_grads, h=H, tol=TOL):
    """Central-difference check of d(fwd)/d(array) for each listed array."""
    for arr, g in zip(arrays, analytic_grads):
        flat = arr.ravel()
        gf = g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = fwd()
            flat[i] = orig - h
            fm = fwd()
            flat[i] = orig
            fd = (fp - fm) / (2 * h)
            rel = abs(fd - gf[i]) / max(abs(fd), abs(gf[i]), 1e-8)
            assert rel < tol, f"element {i}: fd={fd:.3e} analytic={gf[i]:.3e}"


def test_conv2d_gradients():
    rng = _rng(1)
    conv = nnet.Conv2d(2, 3, 3, rng, "c")
    x = rng.normal(0, 1, (2, 2, 5, 5))
    proj = rng.normal(0, 1, (2, 3, 5, 5))

    def fwd():
        return float(np.sum(proj * conv.forward(x)))

    y = conv.forward(x)
    conv.w.zero_grad(), conv.b.zero_grad()
    gx = conv.backward(proj)
    _fd_check(fwd, [x, conv.w.value, conv.b.value], [gx, conv.w.grad, conv.b.grad])


def test_relu_gradients_and_branches():
    rng = _rng(2)
    relu = nnet.ReLU()
    x = rng.normal(0, 1, (2, 3, 4, 4))
    x[np.abs(x) < 0.05] = 0.1  # keep FD away from the kink
    proj = rng.normal(0, 1, x.shape)

    def fwd():
        return float(np.sum(proj * relu.forward(x)))

    relu.forward(x)
    gx = relu.backward(proj)
    _fd_check(fwd, [x], [gx])
    # both branches exercised
    assert (x > 0).any() and (x < 0).any()
    assert np.all(gx[x < 0] == 0.0)


def test_channel_attention_gradients():
    rng = _rng(3)
    ca = nnet.ChannelAttention(4, 2, rng, "ca")
    ca.b1.value += 0.5  # keep the bottleneck ReLU away from its kink
    x = rng.normal(0, 1, (2, 4, 3, 3))
    proj = rng.normal(0, 1, x.shape)

    def fwd():
        return float(np.sum(proj * ca.forward(x)))

    ca.forward(x)
    for p in ca.parameters():
        p.zero_grad()
    gx = ca.backward(proj)
    _fd_check(
        fwd,
        [x, ca.w1.value, ca.b1.value, ca.w2.value, ca.b2.value],
        [gx, ca.w1.grad, ca.b1.grad, ca.w2.grad, ca.b2.grad],
    )


def test_channel_attention_behavior():
    rng = _rng(4)
    ca = nnet.ChannelAttention(4, 2, rng, "ca")
    # constant per-channel feature: output is exactly gate * input
    x = np.ones((1, 4, 5, 5)) * np.array([1.0, 2.0, -1.0, 0.5])[None, :, None, None]
    y = ca.forward(x)
    g = ca.gate(x)
    assert np.all(g > 0) and np.all(g < 1)
    assert np.allclose(y, x * g[:, :, None, None], atol=0)
    # doubling one channel doubles its pooled statistic
    x2 = x.copy()
    x2[:, 1] *= 2.0
    assert x2[:, 1].mean() == 2.0 * x[:, 1].mean()
    # zero-initialized attention weights gate every channel by sigmoid(0) = 1/2
    for p in ca.parameters():
        p.value[...] = 0.0
    assert np.allclose(ca.gate(x), 0.5, atol=0)


def test_pixel_shuffle_shape_and_gradients():
    rng = _rng(5)
    ps = nnet.PixelShuffle(2)
    x = rng.normal(0, 1, (1, 16, 3, 5))
    y = ps.forward(x)
    assert y.shape == (1, 4, 6, 10)  # (4C, H, W) -> (C, 2H, 2W)
    # linear layer: backward is the exact transpose
    proj = rng.normal(0, 1, y.shape)

    def fwd():
        return float(np.sum(proj * ps.forward(x)))

    ps.forward(x)
    gx = ps.backward(proj)
    _fd_check(fwd, [x], [gx])
    # shuffle then unshuffle is the identity
    assert np.array_equal(ps.backward(ps.forward(x)), x)


def test_pixel_shuffle_channel_arrangement():
    x = np.zeros((1, 4, 1, 1))
    x[0, 2, 0, 0] = 7.0  # channel index 2 = offset (i=1, j=0)
    y = nnet.PixelShuffle(2).forward(x)
    assert y[0, 0, 1, 0] == 7.0


def test_loss_values():
    y = np.zeros((1, 1, 1, 1))
    for kind in ("mse", "l1", "charbonnier"):
        v, g = loss(kind, y, y)
        assert v == 0.0
        assert np.all(g == 0.0)
    yhat = y + 3.0
    v, _ = loss("charbonnier", y, yhat, eps=4.0)
    assert v == pytest.approx(1.0, abs=1e-12)  # sqrt(25) - 4
    v, _ = loss("mse", y, yhat)
    assert v == pytest.approx(9.0, abs=1e-12)
    v, _ = loss("l1", y, yhat)
    assert v == pytest.approx(3.0, abs=1e-12)


def test_charbonnier_below_l1_and_asymptotically_linear():
    e = np.array([-50.0, -5.0, -0.3, 0.2, 4.0, 40.0, 400.0])
    y = np.zeros_like(e)
    for ei in e:
        c, _ = loss("charbonnier", y[:1], np.array([ei]), eps=4.0)
        l, _ = loss("l1", y[:1], np.array([ei]))
        assert c <= l + 1e-12
    big = 1e6
    c, _ = loss("charbonnier", np.array([0.0]), np.array([big]), eps=4.0)
    assert c / big == pytest.approx(1.0, rel=1e-4)


def test_loss_gradients_finite_difference():
    rng = _rng(6)
    y = rng.normal(0, 10, (2, 3, 4, 4))
    yhat = y + rng.normal(0, 5, y.shape)
    yhat[np.abs(yhat - y) < 0.05] += 0.1  # keep L1 away from its kink
    for kind in ("mse", "l1", "charbonnier"):
        _, g = loss(kind, y, yhat)

        def fwd():
            return loss(kind, y, yhat)[0]

        _fd_check(fwd, [yhat], [g])


def test_loss_shape_mismatch():
    with pytest.raises(ShapeMismatchError):
        loss("mse", np.zeros((2, 2)), np.zeros((2, 3)))


def test_unknown_loss():
    with pytest.raises(ValueError):
        loss("huber", np.zeros(2), np.zeros(2))
