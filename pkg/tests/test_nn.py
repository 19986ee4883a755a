import numpy as np
import pytest

from qualtrain import imageops, nn
from qualtrain.errors import (CheckpointError, ConfigurationError, DimensionError,
                              LabelError, ScoreError)
from qualtrain.nn import layers

from conftest import gradcheck

TINY = nn.Architecture(input_side=4, input_channels=2, conv_channels=(3, 3),
                       fc_sizes=(6, 5), num_classes=4)


# ---------------------------------------------------------------------------
# Image representation


def test_byte_unit_roundtrip_identity():
    all_bytes = np.arange(256, dtype=np.uint8).reshape(16, 16, 1).repeat(3, axis=2)
    assert np.array_equal(imageops.to_bytes(imageops.to_unit(all_bytes)), all_bytes)


def test_rounding_half_away_from_zero():
    assert imageops.round_to_bytes_255(np.array([0.5, 1.5, 254.49, 254.5])).tolist() == \
        [1, 2, 254, 255]


# ---------------------------------------------------------------------------
# Shapes (the architecture table)


def test_default_architecture_shapes():
    shapes = nn.DEFAULT_ARCH.param_shapes()
    assert shapes["conv1_w"] == (5, 5, 3, 64)
    assert shapes["conv2_w"] == (5, 5, 64, 64)
    assert shapes["fc1_w"] == (4096, 384)
    assert shapes["fc2_w"] == (384, 192)
    assert shapes["softmax_w"] == (192, 10)
    assert nn.DEFAULT_ARCH.flat_size == 4096


def test_forward_intermediate_shapes():
    params = nn.init_params(seed=0)
    x = np.random.default_rng(0).random((1, 32, 32, 3)).astype(np.float32)
    p = params.tensors
    c1, _ = layers.conv2d_forward(x, p["conv1_w"], p["conv1_b"])
    assert c1.shape == (1, 32, 32, 64)
    r1, _ = layers.relu_forward(c1)
    p1, _ = layers.maxpool_forward(r1, 3, 2)
    assert p1.shape == (1, 16, 16, 64)
    l1, _ = layers.lrn_forward(p1)
    assert l1.shape == (1, 16, 16, 64)
    c2, _ = layers.conv2d_forward(l1, p["conv2_w"], p["conv2_b"])
    assert c2.shape == (1, 16, 16, 64)
    r2, _ = layers.relu_forward(c2)
    l2, _ = layers.lrn_forward(r2)
    p2, _ = layers.maxpool_forward(l2, 3, 2)
    assert p2.shape == (1, 8, 8, 64)
    assert p2.reshape(1, -1).shape[1] == 4096
    logits, probs, _ = nn.forward(params, x)
    assert logits.shape == (1, 10)


def test_forward_rejects_wrong_input_shape():
    params = nn.init_params(seed=0)
    with pytest.raises(DimensionError, match="input"):
        nn.forward(params, np.zeros((1, 16, 16, 3), np.float32))


def test_params_reject_wrong_shape():
    good = nn.init_params(TINY, seed=0).tensors
    bad = dict(good)
    bad["fc1_w"] = np.zeros((3, 3))
    with pytest.raises(DimensionError, match="fc1_w"):
        nn.ModelParams(TINY, bad)


def test_forward_deterministic():
    params = nn.init_params(seed=3)
    x = np.random.default_rng(1).random((4, 32, 32, 3)).astype(np.float32)
    a, pa, _ = nn.forward(params, x)
    b, pb, _ = nn.forward(params, x)
    assert np.array_equal(a, b) and np.array_equal(pa, pb)


# ---------------------------------------------------------------------------
# Softmax


def test_softmax_distribution_properties():
    rng = np.random.default_rng(2)
    logits = rng.standard_normal((50, 10)) * 5
    probs = layers.softmax(logits)
    assert np.all(probs > 0) and np.all(probs < 1)
    assert np.abs(probs.sum(axis=1) - 1).max() < 1e-9
    shifted = layers.softmax(logits + 7.3)
    assert np.abs(shifted - probs).max() < 1e-9


# ---------------------------------------------------------------------------
# LRN


def test_lrn_zero_input():
    y, _ = layers.lrn_forward(np.zeros((2, 3, 3, 8)))
    assert np.array_equal(y, np.zeros((2, 3, 3, 8)))


def test_lrn_single_channel_closed_form():
    x = np.zeros((1, 1, 1, 16))
    x[0, 0, 0, 7] = 2.5
    y, _ = layers.lrn_forward(x)
    alpha, beta = 0.001 / 9.0, 0.75
    expected = 2.5 / (1.0 + alpha * 2.5 ** 2) ** beta
    assert abs(y[0, 0, 0, 7] - expected) < 1e-12
    others = np.delete(y.reshape(-1), 7)
    assert np.abs(others).max() == 0.0


def test_lrn_matches_per_element_loop():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((2, 4, 4, 13))
    y, _ = layers.lrn_forward(x, radius=4, bias=1.0, alpha=0.001 / 9, beta=0.75)
    ref = np.empty_like(x)
    for n in range(2):
        for i in range(4):
            for j in range(4):
                for c in range(13):
                    lo, hi = max(0, c - 4), min(13, c + 5)
                    s = (x[n, i, j, lo:hi] ** 2).sum()
                    ref[n, i, j, c] = x[n, i, j, c] / (1.0 + (0.001 / 9) * s) ** 0.75
    assert np.abs(y - ref).max() < 1e-6


# ---------------------------------------------------------------------------
# Label distributions and loss


def test_onehot():
    v = nn.onehot(3)
    assert v[3] == 1.0 and v.sum() == 1.0 and (v >= 0).all()
    assert not np.array_equal(nn.onehot(0), nn.onehot(1))
    with pytest.raises(LabelError):
        nn.onehot(10)


def test_smooth_labels_examples():
    assert np.array_equal(nn.smooth_labels(4, 1.0), nn.onehot(4))
    v = nn.smooth_labels(2, 0.7)
    assert v[2] == 0.7
    assert np.allclose(np.delete(v, 2), 0.3 / 9)
    assert abs(v.sum() - 1.0) < 1e-12
    u = nn.smooth_labels(5, 0.1)
    assert np.allclose(u, 0.1)  # (1 - 0.1) / 9 == 0.1: uniform
    with pytest.raises(ScoreError):
        nn.smooth_labels(1, 0.0)
    with pytest.raises(ScoreError):
        nn.smooth_labels(1, 1.2)


def test_smooth_labels_random_draws_valid():
    rng = np.random.default_rng(4)
    for _ in range(1000):
        y = int(rng.integers(0, 10))
        s = float(rng.uniform(1e-6, 1.0))
        v = nn.smooth_labels(y, s)
        assert abs(v.sum() - 1.0) < 1e-9
        assert np.all(v > 0.0)


def test_batch_constructors_match_scalar():
    rng = np.random.default_rng(5)
    labels = rng.integers(0, 10, 32)
    scores = rng.uniform(0.05, 1.0, 32)
    q = nn.smooth_labels_batch(labels, scores)
    oh = nn.onehot_batch(labels)
    for i in range(32):
        assert np.allclose(q[i], nn.smooth_labels(int(labels[i]), float(scores[i])))
        assert np.array_equal(oh[i], nn.onehot(int(labels[i])))


def test_loss_values():
    q = nn.onehot(3)
    assert nn.loss(q, q) == 0.0
    assert nn.loss(nn.onehot(0), nn.onehot(1)) == 2.0
    uniform = np.full(10, 0.1)
    assert abs(nn.loss(uniform, nn.onehot(3)) - 0.9) < 1e-12


# ---------------------------------------------------------------------------
# Gradients


def _tiny_setup(seed=0, dtype=np.float64):
    rng = np.random.default_rng(seed)
    params = nn.init_params(TINY, seed=seed, dtype=dtype)
    x = rng.random((3, 4, 4, 2))
    labels = rng.integers(0, 4, 3)
    scores = rng.uniform(0.3, 1.0, 3)
    q = nn.smooth_labels_batch(labels, scores, 4)
    return params, x, q, rng


@pytest.mark.parametrize("loss_kind", ["squared", "cross_entropy"])
def test_composed_network_gradients(loss_kind):
    params, x, q, rng = _tiny_setup()
    wd = 0.004

    def total():
        _, probs, _ = nn.forward(params, x)
        return nn.batch_loss(probs, q, loss_kind) + nn.decay_penalty(params, wd)

    _, _, cache = nn.forward(params, x)
    grads = nn.backward(cache, q, weight_decay=wd, loss_kind=loss_kind)
    for name in params.names:
        gradcheck(params.tensors[name], grads[name], total, rng, samples=40)


def test_conv_layer_gradients():
    rng = np.random.default_rng(7)
    x = rng.standard_normal((2, 5, 5, 3))
    w = rng.standard_normal((5, 5, 3, 4)) * 0.3
    b = rng.standard_normal(4) * 0.1
    target = rng.standard_normal((2, 5, 5, 4))

    def loss():
        y, _ = layers.conv2d_forward(x, w, b)
        return float(((y - target) ** 2).sum())

    y, cache = layers.conv2d_forward(x, w, b)
    dx, dw, db = layers.conv2d_backward(2 * (y - target), cache)
    gradcheck(x, dx, loss, rng, samples=60)
    gradcheck(w, dw, loss, rng, samples=60)
    gradcheck(b, db, loss, rng, samples=4)


def test_maxpool_gradients():
    rng = np.random.default_rng(8)
    x = rng.standard_normal((2, 7, 7, 3))  # odd size exercises SAME padding
    target = rng.standard_normal((2, 4, 4, 3))

    def loss():
        y, _ = layers.maxpool_forward(x, 3, 2)
        return float(((y - target) ** 2).sum())

    y, cache = layers.maxpool_forward(x, 3, 2)
    dx = layers.maxpool_backward(2 * (y - target), cache)
    gradcheck(x, dx, loss, rng, samples=90)


def test_lrn_gradients():
    rng = np.random.default_rng(9)
    x = rng.standard_normal((2, 3, 3, 11))
    target = rng.standard_normal((2, 3, 3, 11))

    def loss():
        y, _ = layers.lrn_forward(x)
        return float(((y - target) ** 2).sum())

    y, cache = layers.lrn_forward(x)
    dx = layers.lrn_backward(2 * (y - target), cache)
    gradcheck(x, dx, loss, rng, samples=150)


def test_fc_gradients():
    rng = np.random.default_rng(10)
    x = rng.standard_normal((4, 6))
    w = rng.standard_normal((6, 3))
    b = rng.standard_normal(3)
    target = rng.standard_normal((4, 3))

    def loss():
        y, _ = layers.fc_forward(x, w, b)
        return float(((y - target) ** 2).sum())

    y, _ = layers.fc_forward(x, w, b)
    dx, dw, db = layers.fc_backward(2 * (y - target), x, w)
    gradcheck(x, dx, loss, rng, samples=24)
    gradcheck(w, dw, loss, rng, samples=18)
    gradcheck(b, db, loss, rng, samples=3)


def test_weight_decay_gradient_is_wd_times_w():
    params, x, q, _ = _tiny_setup(seed=11)
    _, _, cache = nn.forward(params, x)
    with_wd = nn.backward(cache, q, weight_decay=0.004)
    without = nn.backward(cache, q, weight_decay=0.0)
    for name in ("fc1_w", "fc2_w"):
        assert np.allclose(with_wd[name] - without[name], 0.004 * params[name])
    for name in ("conv1_w", "conv2_w", "softmax_w", "fc1_b", "fc2_b"):
        assert np.array_equal(with_wd[name], without[name])


# ---------------------------------------------------------------------------
# Optimizer


def test_learning_rate_schedule():
    cfg = nn.TrainingConfig()
    assert nn.learning_rate(cfg, 0) == 0.1
    assert abs(nn.learning_rate(cfg, 349) - 0.1) < 1e-15
    assert abs(nn.learning_rate(cfg, 350) - 0.01) < 1e-15
    assert abs(nn.learning_rate(cfg, 1999) - 1e-6) < 1e-18


def test_config_validation():
    with pytest.raises(ConfigurationError):
        nn.TrainingConfig(learning_rate=-1)
    with pytest.raises(ConfigurationError):
        nn.TrainingConfig(lr_decay=1.5)
    with pytest.raises(ConfigurationError):
        nn.TrainingConfig(epochs=0)
    with pytest.raises(ConfigurationError):
        nn.TrainingConfig(loss="hinge")


def test_sgd_step_applies_lr():
    params = nn.init_params(TINY, seed=12, dtype=np.float64)
    before = params.copy()
    grads = {n: np.ones_like(params[n]) for n in params.names}
    cfg = nn.TrainingConfig(learning_rate=0.5, epochs=10, lr_decay_every=1)
    nn.sgd_step(params, grads, cfg, epoch=1)  # lr = 0.5 * 0.1
    for n in params.names:
        assert np.allclose(before[n] - params[n], 0.05)


def test_underflowed_learning_rate_is_noop():
    params = nn.init_params(TINY, seed=13)
    before = params.copy()
    cfg = nn.TrainingConfig()
    far = 350 * 330
    assert nn.learning_rate(cfg, far) == 0.0
    grads = {n: np.ones_like(params[n]) for n in params.names}
    nn.sgd_step(params, grads, cfg, epoch=far)
    for n in params.names:
        assert np.array_equal(before[n], params[n])


def test_momentum_velocity():
    params = nn.init_params(TINY, seed=14, dtype=np.float64)
    cfg = nn.TrainingConfig(momentum=0.9)
    vel = nn.zero_velocity(params)
    g = {n: np.full_like(params[n], 2.0) for n in params.names}
    before = params.copy()
    nn.sgd_step(params, g, cfg, 0, vel)
    nn.sgd_step(params, g, cfg, 0, vel)
    # v1 = 2, v2 = 2 + 0.9*2 = 3.8; total step = lr*(2 + 3.8)
    assert np.allclose(before["fc1_w"] - params["fc1_w"], 0.1 * 5.8)


# ---------------------------------------------------------------------------
# Checkpoints


def test_checkpoint_roundtrip(tmp_path):
    params = nn.init_params(TINY, seed=15)
    path = str(tmp_path / "model.ckpt")
    nn.save_checkpoint(path, params, epoch=12, seed=15, config_hash="abc123")
    loaded, header, velocity = nn.load_checkpoint(path)
    assert header["epoch"] == 12 and header["seed"] == 15
    assert header["config_hash"] == "abc123"
    assert velocity is None
    for n in params.names:
        assert np.array_equal(loaded[n], params[n])


def test_checkpoint_velocity_roundtrip(tmp_path):
    params = nn.init_params(TINY, seed=16)
    vel = {n: np.full_like(params[n], 0.25) for n in params.names}
    path = str(tmp_path / "model.ckpt")
    nn.save_checkpoint(path, params, 3, 16, "h", velocity=vel)
    _, header, loaded_vel = nn.load_checkpoint(path)
    assert header["has_velocity"]
    for n in params.names:
        assert np.array_equal(loaded_vel[n], vel[n])


def test_checkpoint_rejects_corruption(tmp_path):
    params = nn.init_params(TINY, seed=17)
    path = str(tmp_path / "model.ckpt")
    nn.save_checkpoint(path, params, 0, 17, "h")
    raw = bytearray(open(path, "rb").read())
    raw[:4] = b"XXXX"
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(bytes(raw))
    with pytest.raises(CheckpointError):
        nn.load_checkpoint(str(bad))
    truncated = tmp_path / "short.ckpt"
    truncated.write_bytes(open(path, "rb").read()[:-40])
    with pytest.raises(CheckpointError):
        nn.load_checkpoint(str(truncated))


def test_checkpoint_float32_little_endian(tmp_path):
    params = nn.init_params(TINY, seed=18)
    path = str(tmp_path / "model.ckpt")
    nn.save_checkpoint(path, params, 0, 18, "h")
    raw = open(path, "rb").read()
    header_end = raw.index(b"\n", len(nn.network.CKPT_MAGIC)) + 1
    first = np.frombuffer(raw, dtype="<f4", count=params["conv1_w"].size,
                          offset=header_end)
    assert np.array_equal(first.reshape(params["conv1_w"].shape), params["conv1_w"])


# ---------------------------------------------------------------------------
# Optimization sanity


def test_training_reduces_loss_on_small_subset():
    arch = nn.Architecture(input_side=8, input_channels=3, conv_channels=(8, 8),
                           fc_sizes=(32, 16), num_classes=4)
    rng = np.random.default_rng(19)
    labels = rng.integers(0, 4, 50)
    xs = np.empty((50, 8, 8, 3), np.float32)
    yy, xx = np.mgrid[0:8, 0:8].astype(np.float64)
    for i, lab in enumerate(labels):
        base = np.sin(xx * (0.5 + 0.5 * lab)) + np.cos(yy * (0.3 + 0.4 * lab))
        xs[i] = np.stack([base, -base, base * 0.5], -1) * 0.25 + 0.5
    xs += rng.normal(0, 0.02, xs.shape).astype(np.float32)
    q = nn.onehot_batch(labels, 4).astype(np.float32)

    params = nn.init_params(arch, seed=19)
    cfg = nn.TrainingConfig(batch_size=50, epochs=1)
    losses = []
    for step in range(200):
        _, probs, cache = nn.forward(params, xs)
        losses.append(nn.batch_loss(probs, q) + nn.decay_penalty(params, cfg.weight_decay))
        grads = nn.backward(cache, q, cfg.weight_decay)
        nn.sgd_step(params, grads, cfg, 0)
    windows = [np.mean(losses[k:k + 20]) for k in range(0, 200, 20)]
    assert all(a > b for a, b in zip(windows, windows[1:])), windows
