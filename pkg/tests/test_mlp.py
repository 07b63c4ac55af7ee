import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rtlsguard import mlp
from rtlsguard.mlp import TrainConfig

from oracles import mlp_fd_gradients, relative_error

finite = st.floats(-20, 20, allow_nan=False)


def toy_separable(seed=0, n=120):
    r = np.random.default_rng(seed)
    centers = np.array([[0.2, 0.2], [0.8, 0.2], [0.5, 0.8]])
    y = r.integers(0, 3, size=n)
    return centers[y] + 0.05 * r.normal(size=(n, 2)), y


def test_activation_examples():
    assert mlp.activation_eval("swish", 0.0) == (0.0, 0.5)
    assert mlp.activation_eval("relu", -3.0) == (0.0, 0.0)
    assert mlp.activation_eval("tanh", 0.0) == (0.0, 1.0)
    with pytest.raises(ValueError):
        mlp.activation_eval("gelu", 0.0)


@pytest.mark.parametrize("kind", mlp.ACTIVATIONS)
@given(x=st.floats(-5, 5, allow_nan=False).filter(lambda v: abs(v) > 1e-3))
def test_activation_derivative_matches_fd(kind, x):
    h = 1e-6
    fd = (mlp.activation_eval(kind, x + h)[0] - mlp.activation_eval(kind, x - h)[0]) / (2 * h)
    assert abs(mlp.activation_eval(kind, x)[1] - fd) < 1e-6


def test_architectures():
    assert mlp.build_mlp("dnn", 7).layer_sizes == (7, 64, 32, 16, 3)
    assert mlp.build_mlp("nn", 10).layer_sizes == (10, 16, 3)
    with pytest.raises(ValueError):
        mlp.build_mlp("cnn", 7)


def test_model_invariants_enforced():
    with pytest.raises(ValueError):
        mlp.init_mlp((4, 3), dropout_rate=1.0)
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(momentum=1.0)


def test_no_dropout_training_equals_inference(rng):
    m = mlp.build_mlp("dnn", 5, dropout_rate=0.0, seed=1)
    x = rng.uniform(size=(8, 5))
    a, _ = mlp.forward(m, x)
    b, _ = mlp.forward(m, x, training=True, rng=rng)
    np.testing.assert_array_equal(a, b)


def test_zero_model_uniform_scores():
    m = mlp.init_mlp((4, 5, 3))
    for w in m.weights:
        w[:] = 0
    probs = mlp.predict_proba(m, np.ones((2, 4)))
    np.testing.assert_allclose(probs, 1 / 3)
    labels, _ = mlp.predict(m, np.ones((2, 4)))
    assert list(labels) == [0, 0]


def test_dropout_expectation_monte_carlo():
    """Mean of 10^5 dropout-masked outputs equals the inference output within 1%."""
    m = mlp.build_mlp("nn", 6, dropout_rate=0.3, seed=3)
    x = np.random.default_rng(0).uniform(size=6)
    ref, _ = mlp.forward(m, x)
    batch = np.repeat(x[None, :], 100_000, axis=0)
    scores, _ = mlp.forward(m, batch, training=True, rng=np.random.default_rng(1))
    assert relative_error(scores.mean(axis=0), ref[0]) < 0.01


def test_forward_width_mismatch():
    with pytest.raises(ValueError):
        mlp.forward(mlp.build_mlp("nn", 4), np.zeros((1, 5)))


def test_loss_examples():
    loss, grad = mlp.loss_softmax_ce(np.zeros((1, 3)), [1])
    assert loss == pytest.approx(math.log(3))
    loss, _ = mlp.loss_softmax_ce(np.array([[0.0, 60.0, 0.0]]), [1])
    assert loss < 1e-20
    with pytest.raises(ValueError):
        mlp.loss_softmax_ce(np.zeros((1, 3)), [3])


@given(s=arrays(float, (4, 3), elements=finite), y=st.lists(st.integers(0, 2), min_size=4,
                                                              max_size=4))
def test_loss_gradient_rows_sum_to_zero(s, y):
    _, g = mlp.loss_softmax_ce(s, y)
    assert np.all(np.abs(g.sum(axis=1)) < 1e-12)


@pytest.mark.parametrize("activation", mlp.ACTIVATIONS)
def test_backprop_matches_finite_differences(activation):
    r = np.random.default_rng(7)
    m = mlp.init_mlp((10, 8, 3), activation, 0.0, seed=2)
    x, y = r.uniform(size=(6, 10)), r.integers(0, 3, size=6)
    scores, cache = mlp.forward(m, x)
    _, g = mlp.loss_softmax_ce(scores, y)
    gw, gb, _ = mlp.backward(m, cache, g)
    fw, fb = mlp_fd_gradients(m, x, y)
    for a, b in zip(gw + gb, fw + fb):
        assert relative_error(a, b) < 1e-5


def test_input_gradient_matches_finite_differences(rng):
    m = mlp.init_mlp((4, 6, 3), "tanh", seed=0)
    x, y = rng.uniform(size=(1, 4)), np.array([2])
    scores, cache = mlp.forward(m, x)
    _, g = mlp.loss_softmax_ce(scores, y)
    _, _, gx = mlp.backward(m, cache, g)
    h, fd = 1e-6, np.zeros(4)
    for i in range(4):
        e = np.zeros((1, 4))
        e[0, i] = h
        fd[i] = (mlp.loss_softmax_ce(mlp.forward(m, x + e)[0], y)[0]
                 - mlp.loss_softmax_ce(mlp.forward(m, x - e)[0], y)[0]) / (2 * h)
    assert relative_error(gx[0], fd) < 1e-5


def test_zero_learning_rate_keeps_model():
    x, y = toy_separable()
    m = mlp.build_mlp("nn", 2, seed=0)
    trained, _ = mlp.fit(m, x, y, TrainConfig(epochs=3, learning_rate=0.0))
    for a, b in zip(m.weights + m.biases, trained.weights + trained.biases):
        np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("optimizer", ["sgd", "adam"])
def test_loss_decreases_on_separable_toy(optimizer):
    x, y = toy_separable()
    lr = 0.05 if optimizer == "sgd" else 0.01
    m, losses = mlp.fit(mlp.build_mlp("nn", 2, seed=0), x, y,
                        TrainConfig(epochs=50, learning_rate=lr, optimizer=optimizer))
    assert losses[-1] < 0.5 * losses[0]
    assert np.mean(mlp.predict(m, x)[0] == y) > 0.95


def test_fit_is_deterministic():
    x, y = toy_separable()
    cfg = TrainConfig(epochs=5, seed=4)
    a, _ = mlp.fit(mlp.build_mlp("dnn", 2, dropout_rate=0.3, seed=1), x, y, cfg)
    b, _ = mlp.fit(mlp.build_mlp("dnn", 2, dropout_rate=0.3, seed=1), x, y, cfg)
    for u, v in zip(a.weights, b.weights):
        np.testing.assert_array_equal(u, v)


def test_predict_probabilities(rng):
    m = mlp.build_mlp("dnn", 3, seed=5)
    x = rng.uniform(size=(10, 3))
    labels, probs = mlp.predict(m, x)
    assert np.all(np.abs(probs.sum(axis=1) - 1) < 1e-12)
    np.testing.assert_array_equal(labels, mlp.predict(m, x)[0])


def test_save_load_roundtrip(tmp_path, rng):
    m = mlp.build_mlp("dnn", 7, activation="swish", dropout_rate=0.2, seed=9)
    path = tmp_path / "m.txt"
    mlp.save(m, path)
    back = mlp.load(path)
    assert back.layer_sizes == m.layer_sizes and back.activation == "swish"
    x = rng.uniform(size=(4, 7))
    np.testing.assert_array_equal(mlp.forward(m, x)[0], mlp.forward(back, x)[0])


def test_load_rejects_foreign_file(tmp_path):
    p = tmp_path / "x.txt"
    p.write_text("hello\n")
    with pytest.raises(ValueError):
        mlp.load(p)
