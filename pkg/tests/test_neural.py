import numpy as np
import pytest
from hypothesis import given, strategies as st

from ecg_recurrence.errors import DataError, DegenerateLabelsError, ModelNotReadyError, ShapeError
from ecg_recurrence.neural import checkpoint
from ecg_recurrence.neural import kernels as K
from ecg_recurrence.neural import ssim
from ecg_recurrence.neural.layers import Conv2d, ReLU, Sequential, Upsample, UpConv2d
from ecg_recurrence.neural.models import (
    Autoencoder,
    CnnClassifier,
    TrainConfig,
    train_autoencoder,
    train_cnn_classifier,
)
from gradchecks import CHECKS


@pytest.mark.parametrize("name", sorted(CHECKS))
def test_gradient_check(name):
    worst = max(CHECKS[name](seed) for seed in range(50))
    assert worst < 1e-4


def test_conv_zero_input():
    out, _ = K.conv2d_forward(np.zeros((1, 2, 5, 5)), np.ones((3, 2, 3, 3)), np.zeros(3), 1, 1)
    assert out.shape == (1, 3, 5, 5) and not out.any()


def test_conv_against_direct_sum(rng):
    x = rng.standard_normal((1, 2, 6, 6))
    w = rng.standard_normal((3, 2, 3, 3))
    b = rng.standard_normal(3)
    out, _ = K.conv2d_forward(x, w, b, 2, 1)
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    ref = np.zeros((1, 3, 3, 3))
    for o in range(3):
        for i in range(3):
            for j in range(3):
                ref[0, o, i, j] = np.sum(xp[0, :, 2 * i: 2 * i + 3, 2 * j: 2 * j + 3] * w[o]) + b[o]
    np.testing.assert_allclose(out, ref, rtol=1e-12)


def test_fused_upsample_conv_equals_composition(rng):
    x = rng.standard_normal((2, 3, 5, 4))
    w = rng.standard_normal((4, 3, 3, 3))
    b = rng.standard_normal(4)
    fused, cache = K.upsample_conv2d_forward(x, w, b)
    ref, rcache = K.conv2d_forward(K.upsample_nearest_forward(x, 2)[0], w, b, 1, 1)
    np.testing.assert_allclose(fused, ref, rtol=1e-12, atol=1e-12)
    up = rng.standard_normal(ref.shape)
    dx, dw, db = K.upsample_conv2d_backward(up, cache)
    dxu, dw_r, db_r = K.conv2d_backward(up, rcache)
    np.testing.assert_allclose(dx, K.upsample_nearest_backward(dxu, 2), rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(dw, dw_r, rtol=1e-10)
    np.testing.assert_allclose(db, db_r, rtol=1e-12)


def test_upconv_layer_matches_upsample_then_conv(rng):
    a = UpConv2d(2, 3, rng=np.random.default_rng(1), dtype=np.float64)
    conv = Conv2d(2, 3, rng=np.random.default_rng(1), dtype=np.float64)
    b = Sequential(Upsample(2), conv)
    x = rng.standard_normal((1, 2, 4, 4))
    np.testing.assert_allclose(a.forward(x), b.forward(x), rtol=1e-12)


def test_softmax_uniform():
    np.testing.assert_allclose(K.softmax(np.zeros((1, 5))), 0.2)


def test_shape_errors_name_both_shapes():
    with pytest.raises(ShapeError) as exc:
        K.dense_forward(np.zeros((2, 3)), np.zeros((4, 5)), np.zeros(5))
    assert "(2, 3)" in str(exc.value) and "(4, 5)" in str(exc.value)
    with pytest.raises(ShapeError):
        K.conv2d_forward(np.zeros((1, 2, 4, 4)), np.zeros((1, 3, 3, 3)), np.zeros(1))
    with pytest.raises(ShapeError):
        ssim.mssim(np.zeros((12, 12)), np.zeros((12, 13)))
    with pytest.raises(ShapeError):
        ssim.ae_loss(np.zeros((12, 12)), np.zeros((13, 12)))


# -- mssim and the loss ----------------------------------------------------

@given(st.integers(0, 2**31))
def test_mssim_identity_and_symmetry(seed):
    r = np.random.default_rng(seed)
    x, y = r.uniform(size=(2, 20, 20)), r.uniform(size=(2, 20, 20))
    assert abs(ssim.mssim(x, x) - 1) < 1e-12
    assert ssim.mssim(x, y) == pytest.approx(ssim.mssim(y, x), abs=1e-12)
    assert -1 < ssim.mssim(x, y) <= 1


def test_mssim_constant_patches():
    c1, c2 = 0.01 ** 2, 0.03 ** 2
    a, b = np.full((16, 16), 0.5), np.full((16, 16), 0.7)
    expected = (2 * 0.5 * 0.7 + c1) / (0.5 ** 2 + 0.7 ** 2 + c1) * (c2 / c2)
    assert abs(ssim.mssim(a, b) - expected) < 1e-9


def test_mssim_float32_close_to_float64(rng):
    x = rng.uniform(size=(3, 32, 32))
    y = np.clip(x + 0.1 * rng.standard_normal(x.shape), 0, 1)
    s64 = ssim.mssim(x, y)
    s32 = ssim.mssim(x.astype(np.float32), y.astype(np.float32))
    assert abs(s64 - s32) < 1e-5


def test_ae_loss_values(rng):
    x = rng.uniform(0, 0.9, size=(2, 16, 16))
    assert ssim.ae_loss(x, x) == 0.0
    shifted = x + 0.1
    l1 = np.mean(np.abs(shifted - x))
    assert l1 == pytest.approx(0.1, abs=1e-15)
    assert ssim.ae_loss(x, shifted) == pytest.approx(0.1 + 1 - ssim.mssim(x, shifted), abs=1e-12)


@given(st.integers(0, 2**31))
def test_ae_loss_non_negative(seed):
    r = np.random.default_rng(seed)
    assert ssim.ae_loss(r.uniform(size=(12, 12)), r.uniform(size=(12, 12))) >= 0


# -- models ---------------------------------------------------------------

def test_autoencoder_shapes():
    ae = Autoencoder(in_channels=15, seed=0)
    ae.ready = True
    x = np.random.default_rng(0).uniform(size=(1, 15, 224, 224)).astype(np.float32)
    z = ae.encode_array(x)
    assert z.shape == (1, 14, 14) and np.all(np.isfinite(z))
    assert ae.encode(x[0], "s1").map.shape == (14, 14)
    assert ae.reconstruct(x).shape == x.shape
    np.testing.assert_array_equal(ae.encode_array(x), ae.encode_array(x.copy()))
    with pytest.raises(ShapeError):
        ae.encode_array(np.zeros((1, 14, 224, 224)))


def test_untrained_autoencoder_not_ready():
    with pytest.raises(ModelNotReadyError):
        Autoencoder(in_channels=2).encode_array(np.zeros((1, 2, 32, 32)))


def _tiny_subjects(n=4, c=2, size=32, seed=0):
    r = np.random.default_rng(seed)
    t = np.linspace(0, 1, size)
    base = np.abs(t[:, None] - t[None, :])
    out = []
    for i in range(n):
        out.append(np.stack([np.clip(base * (0.6 + 0.4 * r.uniform()) + 0.05 * r.uniform(size=base.shape), 0, 1)
                             for _ in range(c)]))
    return np.array(out, dtype=np.float32)


def test_training_zero_lr_constant_curve():
    data = _tiny_subjects()
    _, hist = train_autoencoder(data, TrainConfig(epochs=3, batch_size=2, learning_rate=0.0, seed=1))
    losses = [h.train_loss for h in hist]
    assert max(losses) - min(losses) <= 1e-12


def test_training_deterministic_and_decreasing():
    data = _tiny_subjects(n=5)
    cfg = TrainConfig(epochs=15, batch_size=2, learning_rate=3e-3, seed=7)
    m1, h1 = train_autoencoder(data, cfg)
    m2, h2 = train_autoencoder(data, cfg)
    assert [h.train_loss for h in h1] == [h.train_loss for h in h2]
    assert [h.val_loss for h in h1] == [h.val_loss for h in h2]
    assert h1[-1].train_loss < h1[0].train_loss
    np.testing.assert_array_equal(m1.encode_array(data), m2.encode_array(data))


def test_training_preconditions():
    with pytest.raises(DataError):
        train_autoencoder(_tiny_subjects(n=1), TrainConfig(epochs=1))
    with pytest.raises(DataError):
        train_autoencoder(_tiny_subjects() * 2, TrainConfig(epochs=1))
    with pytest.raises(DataError):
        TrainConfig(batch_size=0)
    with pytest.raises(DataError):
        TrainConfig(train_fraction=1.0)


def test_autoencoder_checkpoint_round_trip(tmp_path):
    data = _tiny_subjects()
    model, _ = train_autoencoder(data, TrainConfig(epochs=1, batch_size=2, seed=3))
    path = tmp_path / "ae.rqae"
    model.save(path)
    assert path.read_bytes()[:4] == b"RQAE"
    loaded = Autoencoder.load(path)
    np.testing.assert_array_equal(loaded.encode_array(data), model.encode_array(data))


def test_checkpoint_format(tmp_path):
    blobs = {"a": np.arange(6, dtype=np.float32).reshape(2, 3), "bé": np.array([1.5], np.float32)}
    raw = checkpoint.dumps(blobs)
    assert raw[:8] == b"RQAE" + (1).to_bytes(4, "little")
    # first record: name length, name, rank, dims, values
    assert raw[8:12] == (1).to_bytes(4, "little") and raw[12:13] == b"a"
    assert raw[13:17] == (2).to_bytes(4, "little")
    back = checkpoint.loads(raw)
    assert list(back) == ["a", "bé"]
    np.testing.assert_array_equal(back["a"], blobs["a"])
    with pytest.raises(DataError):
        checkpoint.loads(raw[:-2])
    with pytest.raises(DataError):
        checkpoint.loads(b"XXXX" + raw[4:])


def test_cnn_uniform_initial_probabilities(rng):
    clf = CnnClassifier(seed=0)
    p = clf.predict_proba(rng.standard_normal((6, 14, 14)))
    np.testing.assert_allclose(p, 0.2, atol=1e-6)


@given(st.integers(0, 2**31))
def test_cnn_probabilities_sum_to_one(seed):
    clf = CnnClassifier(seed=seed % 1000)
    for layer in clf.net.layers:
        if "weight" in layer.params:
            layer.params["weight"] = np.random.default_rng(seed).standard_normal(
                layer.params["weight"].shape).astype(np.float32)
    p = clf.predict_proba(np.random.default_rng(seed + 1).standard_normal((3, 14, 14)) * 5)
    np.testing.assert_allclose(p.sum(axis=1), 1, atol=1e-6)


def _separable_maps(n_per_class=6, seed=0):
    r = np.random.default_rng(seed)
    maps, labels = [], []
    for c in range(5):
        proto = np.zeros((14, 14))
        proto[:, c * 2: c * 2 + 3] = 1.0
        for _ in range(n_per_class):
            maps.append(proto + 0.1 * r.standard_normal((14, 14)))
            labels.append(c)
    return np.array(maps), np.array(labels)


def test_cnn_fits_separable_data(tmp_path):
    maps, labels = _separable_maps()
    cfg = TrainConfig(epochs=200, batch_size=8, learning_rate=1e-3, seed=0)
    model, curve = train_cnn_classifier(maps, labels, cfg)
    assert np.mean(model.predict(maps) == labels) == 1.0
    assert curve[-1] < curve[0]
    path = tmp_path / "cnn.rqae"
    model.save(path)
    np.testing.assert_array_equal(CnnClassifier.load(path).predict_proba(maps),
                                  model.predict_proba(maps))


def test_cnn_single_class_rejected():
    maps, _ = _separable_maps(2)
    with pytest.raises(DegenerateLabelsError):
        train_cnn_classifier(maps, np.zeros(len(maps), int), TrainConfig(epochs=1))


def test_cnn_determinism():
    maps, labels = _separable_maps(2)
    cfg = TrainConfig(epochs=3, batch_size=4, seed=5)
    a, ca = train_cnn_classifier(maps, labels, cfg)
    b, cb = train_cnn_classifier(maps, labels, cfg)
    assert ca == cb
    np.testing.assert_array_equal(a.predict_proba(maps), b.predict_proba(maps))
