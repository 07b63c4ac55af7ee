import numpy as np
import pytest

from rtlsguard import experiments as ex
from rtlsguard.mlp import TrainConfig
from rtlsguard.privacy import IDENTITY_PROFILE, TABLE2_PROFILE
from rtlsguard.telemetry import DatasetConfig, generate_dataset

FAST = ex.ModelSettings(mlp=TrainConfig(epochs=5))


@pytest.fixture(scope="module")
def small_xy():
    return generate_dataset(DatasetConfig(repetitions=1), seed=11)


@pytest.fixture(scope="module")
def small_ds(small_xy):
    x, y = small_xy
    return ex.prepare_dataset(x, y, profile=TABLE2_PROFILE, seed=3)


def test_stratified_split_proportions():
    y = np.array([0] * 50 + [1] * 30 + [2] * 20)
    tr, te = ex.stratified_split(y, 0.3, 0)
    assert len(set(tr) & set(te)) == 0 and len(tr) + len(te) == 100
    assert list(np.bincount(y[te])) == [15, 9, 6]
    np.testing.assert_array_equal(te, ex.stratified_split(y, 0.3, 0)[1])


def test_prepare_dataset_normalizes_on_train(small_ds):
    assert small_ds.columns == ("x1", "x2", "x3", "x7", "x8", "x9", "x10")
    assert small_ds.x_train.min() >= 0 and small_ds.x_train.max() <= 1
    assert small_ds.x_test.min() >= 0 and small_ds.x_test.max() <= 1


def test_binary_label_mode(small_xy):
    ds = ex.prepare_dataset(*small_xy, label_mode="binary")
    assert ds.n_classes == 2 and ds.attack_classes == (1,)
    assert set(np.unique(ds.y_train)) == {0, 1}
    with pytest.raises(ValueError):
        ex.prepare_dataset(*small_xy, label_mode="ordinal")


def test_unknown_model_kind(small_ds):
    with pytest.raises(ValueError):
        ex.Detector("svm", 7)


def test_missing_test_split(small_xy):
    ds = ex.prepare_dataset(*small_xy, test_frac=0.0)
    assert ds.x_test is None
    with pytest.raises(ValueError, match="test split"):
        ex.evaluate_model("nn", ds, FAST)


def test_evaluate_report_fields(small_ds):
    rep, det = ex.evaluate_model("dnn", small_ds, FAST, seed=1, config_hash="h")
    assert rep.model == "DNN" and rep.qubits == 0 and rep.config_hash == "h"
    assert rep.train_time_s > 0
    assert all(0 <= v <= 1 for v in rep.f1 + [rep.accuracy, rep.macro_f1, rep.attack_f1])
    assert det.hybrid is None


def test_shallow_tier_uses_fewer_epochs(small_ds):
    det = ex.Detector("dnn-shallow", 7, settings=ex.ModelSettings(mlp=TrainConfig(epochs=10)))
    assert det._mlp_config().epochs == 5


def test_detector_save_load(tmp_path, small_ds):
    _, det = ex.evaluate_model("hybrid-nn", small_ds, FAST, seed=2, qubits=2)
    det.save(tmp_path)
    back = ex.Detector("hybrid-nn", 7, qubits=2).load(tmp_path)
    np.testing.assert_array_equal(det.predict(small_ds.x_test), back.predict(small_ds.x_test))


def test_identity_tradeoff_has_equal_reports(small_xy):
    raw, priv, delta = ex.privacy_tradeoff("nn", *small_xy, IDENTITY_PROFILE, FAST, seed=4)
    assert raw.attack_f1 == priv.attack_f1 and raw.confusion == priv.confusion
    assert delta["attack_f1"] == 0.0


def test_table2_tradeoff_emits_pair(small_xy):
    raw, priv, delta = ex.privacy_tradeoff("nn", *small_xy, TABLE2_PROFILE, FAST, seed=4)
    assert (raw.condition, priv.condition) == ("raw", "privacy")
    assert delta["attack_f1"] == pytest.approx(priv.attack_f1 - raw.attack_f1)


def test_dropout_sweep_rows(small_ds):
    rates = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5]
    rows = ex.dropout_sweep("nn", small_ds, rates, FAST, seed=5)
    assert [r["rate"] for r in rows] == rates
    assert all(0 <= r[k] <= 1 for r in rows for k in ("macro_f1", "weighted_f1", "attack_f1"))
    twice = ex.dropout_sweep("nn", small_ds, [0.0, 0.0], FAST, seed=5)
    assert twice[0] == twice[1]
    with pytest.raises(ValueError):
        ex.dropout_sweep("nn", small_ds, [1.0], FAST)


def test_activation_sweep_cross_product(small_ds):
    rates = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5]
    table, radar = ex.activation_sweep(small_ds, ["relu", "swish", "tanh"], rates, FAST,
                                       kind="nn", seed=6)
    assert len(table) == 18
    assert {(r["activation"], r["rate"]) for r in table} == {
        (a, r) for a in ("relu", "swish", "tanh") for r in rates}
    assert len(radar) == 9 and all(len(r) == 2 + len(rates) for r in radar)
    again, _ = ex.activation_sweep(small_ds, ["tanh"], [0.3], FAST, kind="nn", seed=6)
    assert again[0] == [r for r in table if r["activation"] == "tanh" and r["rate"] == 0.3][0]
    with pytest.raises(ValueError):
        ex.activation_sweep(small_ds, [], rates)


def test_qubit_benchmark_shape(small_ds):
    reports = ex.qubit_depth_benchmark(small_ds, (2, 4, 6), FAST, seed=7)
    assert [(r.model, r.qubits) for r in reports] == [
        ("DNN", 0), ("NN", 0), ("DNN-Shallow", 0),
        ("Hybrid DQNN+NN", 2), ("Hybrid DQNN+NN", 4), ("Hybrid DQNN+NN", 6),
        ("Hybrid DQNN+DNN", 2), ("Hybrid DQNN+DNN", 4), ("Hybrid DQNN+DNN", 6),
    ]
    assert all(r.train_time_s > 0 for r in reports)
