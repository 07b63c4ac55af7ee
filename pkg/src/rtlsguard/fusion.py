"""Hybrid detector: VQC branch + MLP branch joined by a trainable affine fusion head."""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import mlp as mlp_mod
from . import vqc as vqc_mod
from .mlp import TrainConfig

FUSION_HEADER = "# rtlsguard-fusion v1"
VQC_HEADER = "# rtlsguard-vqc v1"
PHASES = ("branches", "fusion", "finetune")


@dataclass
class HybridModel:
    vqc: vqc_mod.VqcModel
    mlp: mlp_mod.MlpModel
    fusion_weights: np.ndarray  # (n_classes, n_classes + n_qubits)
    fusion_bias: np.ndarray

    def __post_init__(self):
        k = self.mlp.n_classes
        self.fusion_weights = np.asarray(self.fusion_weights, dtype=float)
        self.fusion_bias = np.asarray(self.fusion_bias, dtype=float)
        if self.fusion_weights.shape != (k, k + self.vqc.n_qubits):
            raise ValueError(
                f"fusion weights {self.fusion_weights.shape} do not map "
                f"{k}+{self.vqc.n_qubits} inputs to {k} classes"
            )
        if self.fusion_bias.shape != (k,):
            raise ValueError("fusion bias must have one entry per class")

    @property
    def n_classes(self):
        return self.mlp.n_classes


@dataclass
class HybridConfig:
    mlp: TrainConfig = field(default_factory=TrainConfig)
    vqc: TrainConfig = field(
        default_factory=lambda: TrainConfig(epochs=8, batch_size=64, learning_rate=0.05)
    )
    fusion: TrainConfig = field(
        default_factory=lambda: TrainConfig(epochs=30, batch_size=64, learning_rate=0.02)
    )
    finetune: TrainConfig = field(
        default_factory=lambda: TrainConfig(epochs=1, batch_size=64, learning_rate=0.005)
    )
    fusion_mode: str = "weighted"  # or "concat"
    phases: tuple = PHASES

    def __post_init__(self):
        if self.fusion_mode not in ("weighted", "concat"):
            raise ValueError(f"unknown fusion mode {self.fusion_mode!r}")
        unknown = set(self.phases) - set(PHASES)
        if unknown:
            raise ValueError(f"unknown training phases {sorted(unknown)}")


def init_hybrid(vqc, mlp):
    k = mlp.n_classes
    w = np.zeros((k, k + vqc.n_qubits))
    return HybridModel(vqc, mlp, w, np.zeros(k))


def mlp_passthrough(vqc, mlp):
    """Fusion hard-wired to the MLP slice: identity on MLP scores, zero on the VQC."""
    k = mlp.n_classes
    w = np.zeros((k, k + vqc.n_qubits))
    w[:, :k] = np.eye(k)
    return HybridModel(vqc, mlp, w, np.zeros(k))


def branch_scores(hybrid, x):
    mlp_scores, _ = mlp_mod.forward(hybrid.mlp, x)
    return mlp_scores, vqc_mod.vqc_scores(hybrid.vqc, x)


def _fuse(hybrid, mlp_scores, vqc_scores):
    z = np.concatenate([mlp_scores, vqc_scores], axis=1)
    return z, z @ hybrid.fusion_weights.T + hybrid.fusion_bias


def fuse_forward(hybrid, features):
    """Labels, class probabilities and the two branch outputs for a batch."""
    x = np.atleast_2d(np.asarray(features, dtype=float))
    m, q = branch_scores(hybrid, x)
    _, logits = _fuse(hybrid, m, q)
    probs = mlp_mod.softmax(logits)
    return np.argmax(probs, axis=1), probs, (m, q)


def predict_hybrid(hybrid, features):
    return fuse_forward(hybrid, features)[0]


def fusion_loss_and_grad(hybrid, mlp_scores, vqc_scores, labels):
    """Cross-entropy of the fused scores and its gradient w.r.t. the fusion parameters."""
    z, logits = _fuse(hybrid, mlp_scores, vqc_scores)
    loss, g = mlp_mod.loss_softmax_ce(logits, labels)
    return loss, g.T @ z, g.sum(axis=0), g @ hybrid.fusion_weights


def _train_vqc_branch(vqc, x, y, n_classes, config):
    """VQC plus a temporary linear readout, trained with parameter-shift gradients."""
    rng = np.random.default_rng([config.seed, 3])
    head_w = rng.normal(0.0, 0.5, size=(n_classes, vqc.n_qubits))
    head_b = np.zeros(n_classes)
    params = vqc.params.copy()
    encoded = vqc_mod.encode(vqc, x)
    opt = mlp_mod._Optimizer([params, head_w, head_b], config)
    shuffle = np.random.default_rng([config.seed, 1])
    losses = []
    for _ in range(config.epochs):
        total = 0.0
        for idx in mlp_mod.iterate_minibatches(len(x), config.batch_size, shuffle):
            model = vqc.with_params(params)
            exps = vqc_mod._scores_from_encoded(model, encoded[idx], params)
            loss, g = mlp_mod.loss_softmax_ce(exps @ head_w.T + head_b, y[idx])
            g_params = vqc_mod.param_shift_grad(model, None, g @ head_w, encoded=encoded[idx])
            opt.step([params, head_w, head_b], [g_params, g.T @ exps, g.sum(axis=0)])
            total += loss * len(idx)
        losses.append(total / len(x))
    return vqc.with_params(params), head_w, head_b, losses


def _train_fusion(hybrid, m_scores, q_scores, y, config):
    w, b = hybrid.fusion_weights.copy(), hybrid.fusion_bias.copy()
    opt = mlp_mod._Optimizer([w, b], config)
    shuffle = np.random.default_rng([config.seed, 1])
    losses = []
    for _ in range(config.epochs):
        total = 0.0
        for idx in mlp_mod.iterate_minibatches(len(y), config.batch_size, shuffle):
            h = replace(hybrid, fusion_weights=w, fusion_bias=b)
            loss, gw, gb, _ = fusion_loss_and_grad(h, m_scores[idx], q_scores[idx], y[idx])
            opt.step([w, b], [gw, gb])
            total += loss * len(idx)
        losses.append(total / len(y))
    return replace(hybrid, fusion_weights=w, fusion_bias=b), losses


def _finetune(hybrid, x, y, config):
    """Joint pass: MLP by backprop through the fusion, VQC by parameter shift."""
    net = hybrid.mlp.copy()
    w, b = hybrid.fusion_weights.copy(), hybrid.fusion_bias.copy()
    params = hybrid.vqc.params.copy()
    encoded = vqc_mod.encode(hybrid.vqc, x)
    k = hybrid.n_classes
    opt = mlp_mod._Optimizer(net.weights + net.biases + [w, b, params], config)
    shuffle = np.random.default_rng([config.seed, 1])
    dropout = np.random.default_rng([config.seed, 2])
    losses = []
    for _ in range(config.epochs):
        total = 0.0
        for idx in mlp_mod.iterate_minibatches(len(y), config.batch_size, shuffle):
            model = hybrid.vqc.with_params(params)
            m_scores, cache = mlp_mod.forward(net, x[idx], training=True, rng=dropout)
            q_scores = vqc_mod._scores_from_encoded(model, encoded[idx], params)
            h = HybridModel(model, net, w, b)
            loss, gw, gb, gz = fusion_loss_and_grad(h, m_scores, q_scores, y[idx])
            g_w, g_b, _ = mlp_mod.backward(net, cache, gz[:, :k])
            g_params = vqc_mod.param_shift_grad(model, None, gz[:, k:], encoded=encoded[idx])
            opt.step(net.weights + net.biases + [w, b, params], g_w + g_b + [gw, gb, g_params])
            total += loss * len(idx)
        losses.append(total / len(y))
    return HybridModel(hybrid.vqc.with_params(params), net, w, b), losses


def train_hybrid(hybrid, x, y, config=None):
    """Branches first, then the fusion head on frozen branches, then a joint fine-tune.

    Returns (trained hybrid, dict of per-phase loss curves). Phases not listed
    in ``config.phases`` are skipped.
    """
    config = config or HybridConfig()
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=int)
    if len(y) == 0:
        raise ValueError("cannot train on an empty dataset")
    curves = {}
    k = hybrid.n_classes
    if "branches" in config.phases:
        net, curves["mlp"] = mlp_mod.fit(hybrid.mlp, x, y, config.mlp)
        vqc, head_w, head_b, curves["vqc"] = _train_vqc_branch(hybrid.vqc, x, y, k, config.vqc)
        w = np.zeros_like(hybrid.fusion_weights)
        b = np.zeros(k)
        if config.fusion_mode == "weighted":
            # equal-confidence product of the two branch experts as the starting point
            w[:, :k] = 0.5 * np.eye(k)
            w[:, k:] = 0.5 * head_w
            b = 0.5 * head_b
        hybrid = HybridModel(vqc, net, w, b)
    if "fusion" in config.phases:
        m_scores, q_scores = branch_scores(hybrid, x)
        hybrid, curves["fusion"] = _train_fusion(hybrid, m_scores, q_scores, y, config.fusion)
    if "finetune" in config.phases and config.finetune.epochs > 0:
        hybrid, curves["finetune"] = _finetune(hybrid, x, y, config.finetune)
    return hybrid, curves


def save_vqc(model, path):
    lines = [
        VQC_HEADER,
        f"n_qubits {model.n_qubits}",
        f"depth {model.depth}",
        f"encoding {model.encoding}",
        f"entanglement {model.entanglement}",
        "params " + " ".join(repr(float(p)) for p in model.params),
    ]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_vqc(path):
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != VQC_HEADER:
        raise ValueError(f"{path}: not a VQC parameter file")
    head = dict(ln.split(" ", 1) if " " in ln else (ln, "") for ln in lines[1:])
    params = [float(v) for v in head["params"].split()]
    return vqc_mod.VqcModel(int(head["n_qubits"]), int(head["depth"]), np.array(params),
                            head["encoding"], head["entanglement"])


def _sha256(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def save_hybrid(hybrid, directory, manifest=None):
    """Write mlp.txt, vqc.txt, fusion.txt and a manifest.json with file digests."""
    os.makedirs(directory, exist_ok=True)
    mlp_mod.save(hybrid.mlp, os.path.join(directory, "mlp.txt"))
    save_vqc(hybrid.vqc, os.path.join(directory, "vqc.txt"))
    k, width = hybrid.fusion_weights.shape
    lines = [FUSION_HEADER, f"W {k} {width}"]
    lines += [" ".join(repr(float(v)) for v in row) for row in hybrid.fusion_weights]
    lines += [f"b {k}", " ".join(repr(float(v)) for v in hybrid.fusion_bias)]
    with open(os.path.join(directory, "fusion.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    doc = dict(manifest or {})
    doc["files"] = {name: _sha256(os.path.join(directory, name))
                    for name in ("mlp.txt", "vqc.txt", "fusion.txt")}
    with open(os.path.join(directory, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_hybrid(directory):
    """Inverse of ``save_hybrid``; files whose digest disagrees with the manifest are rejected."""
    manifest = os.path.join(directory, "manifest.json")
    if os.path.exists(manifest):
        with open(manifest, encoding="utf-8") as fh:
            expected = json.load(fh).get("files", {})
        for name, digest in expected.items():
            if _sha256(os.path.join(directory, name)) != digest:
                raise ValueError(f"{directory}/{name}: digest does not match manifest")
    net = mlp_mod.load(os.path.join(directory, "mlp.txt"))
    vqc = load_vqc(os.path.join(directory, "vqc.txt"))
    with open(os.path.join(directory, "fusion.txt"), encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if lines[0] != FUSION_HEADER:
        raise ValueError(f"{directory}: not a fusion parameter file")
    k, width = (int(v) for v in lines[1].split()[1:])
    w = np.array([[float(v) for v in ln.split()] for ln in lines[2:2 + k]]).reshape(k, width)
    b = np.array([float(v) for v in lines[3 + k].split()])
    return HybridModel(vqc, net, w, b)


def config_dict(config):
    return asdict(config)
