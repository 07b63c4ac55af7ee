"""Dense networks trained from scratch with SGD + momentum (or Adam).

Weights are stored as ``W[i]`` with shape (fan_in, fan_out) so a forward pass
on a batch of rows is ``X @ W + b``.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("relu", "swish", "tanh")
FORMAT_HEADER = "# rtlsguard-mlp v1"

# named tiers used by the benchmarks
ARCHITECTURES = {
    "nn": (16,),
    "dnn": (64, 32, 16),
    "dnn-shallow": (16,),
}


@dataclass
class MlpModel:
    layer_sizes: tuple
    activation: str = "relu"
    dropout_rate: float = 0.0
    weights: list = field(default_factory=list)
    biases: list = field(default_factory=list)
    seed: int = 0

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout rate must be in [0, 1)")
        if len(self.layer_sizes) < 2:
            raise ValueError("an MLP needs input and output sizes")

    @property
    def n_classes(self):
        return self.layer_sizes[-1]

    def copy(self):
        return copy.deepcopy(self)


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 0.05
    momentum: float = 0.9
    seed: int = 0
    optimizer: str = "sgd"

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning rate must be non-negative")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


def init_mlp(layer_sizes, activation="relu", dropout_rate=0.0, seed=0):
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes, layer_sizes[1:]):
        scale = np.sqrt(2.0 / fan_in) if activation == "relu" else np.sqrt(1.0 / fan_in)
        weights.append(rng.normal(0.0, scale, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(tuple(int(s) for s in layer_sizes), activation, float(dropout_rate),
                    weights, biases, seed)


def build_mlp(kind, n_inputs, n_classes=3, activation="relu", dropout_rate=0.0, seed=0):
    """One of the named tiers: ``nn``, ``dnn`` or ``dnn-shallow``."""
    if kind not in ARCHITECTURES:
        raise ValueError(f"unknown MLP tier {kind!r}; expected one of {sorted(ARCHITECTURES)}")
    hidden = ARCHITECTURES[kind]
    return init_mlp((n_inputs,) + hidden + (n_classes,), activation, dropout_rate, seed)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def activation_eval(kind, x):
    """Value and exact derivative of the activation at ``x`` (elementwise)."""
    x = np.asarray(x, dtype=float)
    if kind == "relu":
        return np.maximum(x, 0.0), (x > 0).astype(float)
    if kind == "swish":
        s = _sigmoid(x)
        return x * s, s + x * s * (1.0 - s)
    if kind == "tanh":
        t = np.tanh(x)
        return t, 1.0 - t * t
    raise ValueError(f"unknown activation {kind!r}")


def softmax(scores):
    z = scores - np.max(scores, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def forward(model, x, training=False, rng=None):
    """Class scores (pre-softmax) plus the cache needed by ``backward``.

    Inverted dropout is applied to hidden activations only when ``training``
    and the rate is nonzero; kept units are scaled by 1 / (1 - p).
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != model.layer_sizes[0]:
        raise ValueError(f"expected {model.layer_sizes[0]} features, got {x.shape[1]}")
    p = model.dropout_rate
    inputs, derivs, masks = [], [], []
    h = x
    n_layers = len(model.weights)
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        inputs.append(h)
        z = h @ w + b
        if i == n_layers - 1:
            h = z
            break
        h, d = activation_eval(model.activation, z)
        mask = None
        if training and p > 0:
            if rng is None:
                raise ValueError("training-mode dropout needs an rng")
            mask = (rng.random(h.shape) >= p) / (1.0 - p)
            h = h * mask
        derivs.append(d)
        masks.append(mask)
    return h, {"inputs": inputs, "derivs": derivs, "masks": masks}


def loss_softmax_ce(scores, labels):
    """Mean softmax cross-entropy and its gradient with respect to the scores."""
    scores = np.atleast_2d(np.asarray(scores, dtype=float))
    labels = np.atleast_1d(np.asarray(labels, dtype=int))
    k = scores.shape[1]
    if np.any(labels < 0) or np.any(labels >= k):
        raise ValueError(f"label out of range for {k} classes")
    z = scores - np.max(scores, axis=1, keepdims=True)
    log_probs = z - np.log(np.sum(np.exp(z), axis=1, keepdims=True))
    n = scores.shape[0]
    loss = -np.mean(log_probs[np.arange(n), labels])
    grad = np.exp(log_probs)
    grad[np.arange(n), labels] -= 1.0
    return float(loss), grad / n


def backward(model, cache, grad_scores):
    """Parameter gradients given d loss / d scores; also returns d loss / d input."""
    g = np.atleast_2d(grad_scores)
    grads_w = [None] * len(model.weights)
    grads_b = [None] * len(model.weights)
    for i in reversed(range(len(model.weights))):
        grads_w[i] = cache["inputs"][i].T @ g
        grads_b[i] = np.sum(g, axis=0)
        g = g @ model.weights[i].T
        if i > 0:
            mask = cache["masks"][i - 1]
            if mask is not None:
                g = g * mask
            g = g * cache["derivs"][i - 1]
    return grads_w, grads_b, g


class _Optimizer:
    """SGD with momentum, or Adam; state lives per parameter array."""

    def __init__(self, params, config):
        self.config = config
        self.velocity = [np.zeros_like(p) for p in params]
        self.second = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        c = self.config
        self.t += 1
        for i, (p, g) in enumerate(zip(params, grads)):
            if c.optimizer == "adam":
                b1, b2 = 0.9, 0.999
                self.velocity[i] = b1 * self.velocity[i] + (1 - b1) * g
                self.second[i] = b2 * self.second[i] + (1 - b2) * g * g
                m_hat = self.velocity[i] / (1 - b1 ** self.t)
                v_hat = self.second[i] / (1 - b2 ** self.t)
                p -= c.learning_rate * m_hat / (np.sqrt(v_hat) + 1e-8)
            else:
                self.velocity[i] = c.momentum * self.velocity[i] - c.learning_rate * g
                p += self.velocity[i]


def iterate_minibatches(n, batch_size, rng):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def train_epoch(model, x, y, config, optimizer, shuffle_rng, dropout_rng):
    """One pass over the data in shuffled mini-batches; updates ``model`` in place."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=int)
    if len(x) == 0:
        raise ValueError("cannot train on an empty dataset")
    total = 0.0
    for idx in iterate_minibatches(len(x), config.batch_size, shuffle_rng):
        scores, cache = forward(model, x[idx], training=True, rng=dropout_rng)
        loss, g = loss_softmax_ce(scores, y[idx])
        gw, gb, _ = backward(model, cache, g)
        optimizer.step(model.weights + model.biases, gw + gb)
        total += loss * len(idx)
    return total / len(x)


def fit(model, x, y, config):
    """Train a copy of ``model``; returns (trained model, per-epoch mean loss)."""
    model = model.copy()
    shuffle_rng = np.random.default_rng([config.seed, 1])
    dropout_rng = np.random.default_rng([config.seed, 2])
    optimizer = _Optimizer(model.weights + model.biases, config)
    losses = [train_epoch(model, x, y, config, optimizer, shuffle_rng, dropout_rng)
              for _ in range(config.epochs)]
    return model, losses


def predict_proba(model, x):
    scores, _ = forward(model, x)
    return softmax(scores)


def predict(model, x):
    """Argmax labels (ties go to the lowest class index) and class probabilities."""
    probs = predict_proba(model, x)
    return np.argmax(probs, axis=1), probs


def _fmt(values):
    return " ".join(repr(float(v)) for v in np.ravel(values))


def save(model, path):
    """Plain-text format: header lines, then one ``W``/``b`` block per layer.

    A ``W i rows cols`` line is followed by ``rows`` lines of ``cols`` floats;
    a ``b i n`` line is followed by one line of ``n`` floats. Floats are
    written with ``repr`` so a load reproduces them exactly.
    """
    lines = [
        FORMAT_HEADER,
        "layer_sizes " + " ".join(str(s) for s in model.layer_sizes),
        f"activation {model.activation}",
        f"dropout {model.dropout_rate!r}",
        f"seed {model.seed}",
    ]
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        lines.append(f"W {i} {w.shape[0]} {w.shape[1]}")
        lines.extend(_fmt(row) for row in w)
        lines.append(f"b {i} {b.size}")
        lines.append(_fmt(b))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load(path):
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != FORMAT_HEADER:
        raise ValueError(f"{path}: not an MLP parameter file")
    head = {}
    pos = 1
    while pos < len(lines) and not lines[pos].startswith(("W ", "b ")):
        key, _, value = lines[pos].partition(" ")
        head[key] = value
        pos += 1
    sizes = tuple(int(s) for s in head["layer_sizes"].split())
    weights, biases = [], []
    while pos < len(lines):
        parts = lines[pos].split()
        if parts[0] == "W":
            rows, cols = int(parts[2]), int(parts[3])
            block = [[float(v) for v in lines[pos + 1 + r].split()] for r in range(rows)]
            weights.append(np.array(block).reshape(rows, cols))
            pos += rows + 1
        elif parts[0] == "b":
            biases.append(np.array([float(v) for v in lines[pos + 1].split()]))
            pos += 2
        else:
            raise ValueError(f"{path}:{pos + 1}: unexpected line {lines[pos]!r}")
    return MlpModel(sizes, head["activation"], float(head["dropout"]), weights, biases,
                    int(head["seed"]))
