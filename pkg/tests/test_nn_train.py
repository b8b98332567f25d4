"""Model plumbing and training loop: architecture bookkeeping, the weights
container, evaluation metrics, and determinism of the loop itself.
"""

import numpy as np
import pytest

from dlsp.morpho import (
    DatasetManifest,
    LabeledSample,
    encode_pgm,
)
from dlsp.nn import (
    ArchSpec,
    BadMagic,
    CnnModel,
    ConvSpec,
    EmptySplit,
    EmptyTrainSplit,
    REDUCED_ARCH,
    ShapeMismatch,
    ShapeMismatchWithArch,
    TrainConfig,
    Truncated,
    build_model,
    evaluate,
    forward,
    history_csv,
    load_split,
    load_weights,
    loss_and_grads,
    predict,
    save_weights,
    train,
)

RNG = np.random.default_rng(0xBEEF)


def zero_model(arch):
    m = build_model(arch, seed=0)
    return CnnModel(arch=arch, params={k: np.zeros_like(v) for k, v in m.params.items()})


# ---------------------------------------------------------------------------
# Architecture bookkeeping


def test_production_parameter_count():
    assert ArchSpec().param_count() == 1_159_150


def test_production_feature_map_sizes():
    assert ArchSpec().spatial_sizes() == [101, 49, 23, 10, 8]
    assert ArchSpec().flat_size() == 4096


def test_tensor_names_and_head_numbering():
    names = list(ArchSpec().tensor_shapes())
    assert names[:2] == ["conv1_w", "conv1_b"]
    assert names[-2:] == ["fc3_w", "fc3_b"]  # head is fc<len(fcs)+1>
    assert list(REDUCED_ARCH.tensor_shapes())[-2:] == ["fc1_w", "fc1_b"]


def test_reduced_arch_shape():
    assert REDUCED_ARCH.spatial_sizes() == [16, 7, 3]
    assert REDUCED_ARCH.param_count() == 427


def test_arch_rejects_conv_that_does_not_fit():
    with pytest.raises(ValueError):
        ArchSpec(input_size=4, convs=(ConvSpec(5, 1, 8),), fcs=(), n_classes=3)


def test_build_model_is_seeded_and_biases_zero():
    a = build_model(REDUCED_ARCH, seed=3)
    b = build_model(REDUCED_ARCH, seed=3)
    c = build_model(REDUCED_ARCH, seed=4)
    for key in a.params:
        assert a.params[key].dtype == np.float32
        np.testing.assert_array_equal(a.params[key], b.params[key])
        if key.endswith("_b"):
            assert not a.params[key].any()
    assert any((a.params[k] != c.params[k]).any() for k in a.params)


def test_forward_rejects_wrong_spatial_size():
    model = build_model(REDUCED_ARCH, seed=0)
    with pytest.raises(ShapeMismatch):
        forward(model, np.zeros((1, 15, 15, 1), dtype=np.float32))
    with pytest.raises(ShapeMismatch):
        forward(model, np.zeros((16, 16, 1), dtype=np.float32))


def test_zero_weights_give_log_k_loss():
    model = zero_model(ArchSpec())
    x = RNG.random((2, 101, 101, 1)).astype(np.float32)
    loss, grads = loss_and_grads(model, x, np.array([3, 7]))
    assert abs(loss - np.log(10.0)) < 1e-6
    # and the all-way tie resolves to the lowest class index
    np.testing.assert_array_equal(predict(model, x), [0, 0])


# ---------------------------------------------------------------------------
# Weights file


def test_weights_round_trip_is_bitwise(tmp_path):
    model = build_model(REDUCED_ARCH, seed=21)
    p1 = tmp_path / "a.weights"
    p2 = tmp_path / "b.weights"
    save_weights(model, p1)
    loaded = load_weights(p1, REDUCED_ARCH)
    for key in model.params:
        assert loaded.params[key].dtype == np.float32
        np.testing.assert_array_equal(loaded.params[key], model.params[key])
    save_weights(loaded, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_weights_magic_and_layout(tmp_path):
    path = tmp_path / "w"
    save_weights(build_model(REDUCED_ARCH, seed=0), path)
    raw = path.read_bytes()
    assert raw[:8] == b"DLSPW001"
    assert int.from_bytes(raw[8:12], "little") == 6  # tensor count
    assert int.from_bytes(raw[12:14], "little") == len("conv1_w")
    assert raw[14:21] == b"conv1_w"
    assert raw[21] == 4  # ndim
    dims = [int.from_bytes(raw[22 + 4 * i : 26 + 4 * i], "little") for i in range(4)]
    assert dims == [3, 3, 1, 4]


def test_weights_bad_magic(tmp_path):
    path = tmp_path / "w"
    save_weights(build_model(REDUCED_ARCH, seed=0), path)
    raw = bytearray(path.read_bytes())
    raw[:8] = b"NOTDLSPW"
    path.write_bytes(bytes(raw))
    with pytest.raises(BadMagic):
        load_weights(path, REDUCED_ARCH)


@pytest.mark.parametrize("cut", [3, 10, 13, 25, 60])
def test_weights_truncated(tmp_path, cut):
    path = tmp_path / "w"
    save_weights(build_model(REDUCED_ARCH, seed=0), path)
    path.write_bytes(path.read_bytes()[:cut])
    with pytest.raises(Truncated):
        load_weights(path, REDUCED_ARCH)


def test_weights_trailing_bytes_rejected(tmp_path):
    path = tmp_path / "w"
    save_weights(build_model(REDUCED_ARCH, seed=0), path)
    path.write_bytes(path.read_bytes() + b"\x00")
    with pytest.raises(ValueError):
        load_weights(path, REDUCED_ARCH)


def test_weights_wrong_architecture(tmp_path):
    path = tmp_path / "w"
    save_weights(build_model(REDUCED_ARCH, seed=0), path)
    with pytest.raises(ShapeMismatchWithArch):
        load_weights(path, ArchSpec())
    # same names, different tensor shape
    other = ArchSpec(input_size=16, convs=(ConvSpec(3, 2, 5), ConvSpec(3, 2, 6)), fcs=(), n_classes=3)
    with pytest.raises(ShapeMismatchWithArch):
        load_weights(path, other)


# ---------------------------------------------------------------------------
# Evaluation


def test_evaluate_counts_by_hand():
    model = zero_model(REDUCED_ARCH)  # predicts class 0 everywhere
    x = RNG.random((3, 16, 16, 1)).astype(np.float32)
    report = evaluate(model, x, np.array([0, 1, 2]))
    assert report.accuracy == pytest.approx(1 / 3)
    assert report.within_one == pytest.approx(2 / 3)
    expected = np.zeros((3, 3), dtype=np.int64)
    expected[0, 0] = expected[1, 0] = expected[2, 0] = 1
    np.testing.assert_array_equal(report.confusion, expected)
    # class 0: f1 = 2*1/(1+3); classes 1 and 2 appear in truth, f1 = 0
    assert report.macro_f1 == pytest.approx((0.5 + 0.0 + 0.0) / 3)


def test_evaluate_skips_classes_absent_everywhere():
    model = zero_model(REDUCED_ARCH)
    x = RNG.random((2, 16, 16, 1)).astype(np.float32)
    report = evaluate(model, x, np.array([0, 0]))
    assert report.macro_f1 == pytest.approx(1.0)  # only class 0 participates
    assert report.accuracy == 1.0


def test_evaluate_empty_split():
    with pytest.raises(EmptySplit):
        evaluate(zero_model(REDUCED_ARCH), np.zeros((0, 16, 16, 1)), np.zeros(0, dtype=int))


def test_within_one_never_below_accuracy():
    model = build_model(REDUCED_ARCH, seed=2)
    x = RNG.random((20, 16, 16, 1)).astype(np.float32)
    y = RNG.integers(0, 3, size=20)
    report = evaluate(model, x, y)
    assert report.within_one >= report.accuracy
    assert report.confusion.sum() == 20


# ---------------------------------------------------------------------------
# Training loop


def toy_data(n=12, seed=1):
    rng = np.random.default_rng(seed)
    x = rng.random((n, 16, 16, 1)).astype(np.float32)
    y = rng.integers(0, 3, size=n).astype(np.int64)
    return x, y


def test_train_rejects_empty():
    model = build_model(REDUCED_ARCH, seed=0)
    with pytest.raises(EmptyTrainSplit):
        train(model, np.zeros((0, 16, 16, 1)), np.zeros(0, dtype=int))


def test_train_zero_epochs_returns_initial_params():
    model = build_model(REDUCED_ARCH, seed=0)
    x, y = toy_data()
    final, best, history = train(model, x, y, TrainConfig(epochs=0))
    assert history == []
    for key in model.params:
        np.testing.assert_array_equal(final.params[key], model.params[key])
    assert best is final


def test_train_is_bitwise_reproducible():
    x, y = toy_data()
    cfg = TrainConfig(learning_rate=1e-3, batch_size=4, epochs=3, seed=9)
    runs = []
    for _ in range(2):
        model = build_model(REDUCED_ARCH, seed=0)
        final, _, history = train(model, x, y, cfg)
        runs.append((final, history))
    for key in runs[0][0].params:
        np.testing.assert_array_equal(runs[0][0].params[key], runs[1][0].params[key])
    assert runs[0][1] == runs[1][1]


def test_train_reduces_loss_and_overfits_small_set():
    x, y = toy_data(n=9, seed=4)
    model = build_model(REDUCED_ARCH, seed=1)
    cfg = TrainConfig(learning_rate=1e-3, epochs=200, seed=2)
    final, _, history = train(model, x, y, cfg)
    assert history[-1]["train_loss"] < history[0]["train_loss"]
    assert np.mean(predict(final, x) == y) == 1.0


def test_train_tracks_best_validation_model():
    x, y = toy_data(n=12, seed=5)
    xv, yv = toy_data(n=6, seed=6)
    model = build_model(REDUCED_ARCH, seed=3)
    cfg = TrainConfig(learning_rate=1e-3, epochs=20, seed=0)
    _, best, history = train(model, x, y, cfg, x_val=xv, y_val=yv)
    best_seen = max(row["val_acc"] for row in history)
    assert np.mean(predict(best, xv) == yv) == pytest.approx(best_seen)


def test_history_csv_layout():
    x, y = toy_data(n=6)
    final, _, history = train(build_model(REDUCED_ARCH, seed=0), x, y, TrainConfig(epochs=2))
    text = history_csv(history)
    lines = text.strip().split("\n")
    assert lines[0] == "epoch,train_loss,train_acc,val_acc"
    assert len(lines) == 3
    assert lines[1].startswith("1,") and lines[1].endswith(",")  # no val -> empty field
    del final


# ---------------------------------------------------------------------------
# Split loading


def write_sample(tmp_path, name, value):
    grid = np.full((16, 16), value, dtype=np.float64)
    (tmp_path / name).write_bytes(encode_pgm(grid))


def test_load_split_round_trip(tmp_path):
    write_sample(tmp_path, "a.pgm", 1.0)
    write_sample(tmp_path, "b.pgm", 0.0)
    write_sample(tmp_path, "c.pgm", 1.0)
    manifest = DatasetManifest(
        samples=(
            LabeledSample("a.pgm", 0.5, 2, "train", "g0"),
            LabeledSample("b.pgm", 0.1, 0, "train", "g1"),
            LabeledSample("c.pgm", 0.9, 1, "val", "g2"),
        )
    )
    x, y = load_split(manifest, "train", tmp_path / "manifest.csv")
    assert x.shape == (2, 16, 16, 1) and x.dtype == np.float32
    np.testing.assert_array_equal(y, [2, 0])
    assert x[0].max() == 1.0 and x[1].max() == 0.0

    with pytest.raises(EmptySplit):
        load_split(manifest, "test", tmp_path / "manifest.csv")


def test_load_split_rejects_unlabeled(tmp_path):
    write_sample(tmp_path, "a.pgm", 1.0)
    manifest = DatasetManifest(samples=(LabeledSample("a.pgm", None, None, "train", "g0"),))
    with pytest.raises(ValueError):
        load_split(manifest, "train", tmp_path / "manifest.csv")
