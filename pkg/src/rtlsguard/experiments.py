"""Dataset preparation, model factory and the benchmark sweeps.

Every run is driven by explicit seeds; training time is measured around the
``fit`` call only.
"""
from __future__ import annotations

import os
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import fusion as fusion_mod
from . import mlp as mlp_mod
from . import vqc as vqc_mod
from .config import derive_seed
from .metrics import build_report, collapse_binary, confusion
from .mlp import TrainConfig
from .privacy import IDENTITY_PROFILE, apply_profile
from .telemetry import FEATURE_NAMES

MODEL_NAMES = {
    "nn": "NN",
    "dnn": "DNN",
    "dnn-shallow": "DNN-Shallow",
    "hybrid-nn": "Hybrid DQNN+NN",
    "hybrid-dnn": "Hybrid DQNN+DNN",
}
TABLE2_ROWS = (
    ("dnn", 0), ("nn", 0), ("dnn-shallow", 0),
    ("hybrid-nn", 2), ("hybrid-nn", 4), ("hybrid-nn", 6),
    ("hybrid-dnn", 2), ("hybrid-dnn", 4), ("hybrid-dnn", 6),
)


@dataclass
class Dataset:
    x_train: np.ndarray
    y_train: np.ndarray
    x_test: np.ndarray | None
    y_test: np.ndarray | None
    columns: tuple
    n_classes: int = 3
    attack_classes: tuple = (1, 2)


@dataclass
class ModelSettings:
    activation: str = "relu"
    dropout: float = 0.3
    vqc_depth: int = 3
    encoding: str = "angle"
    entanglement: str = "ring"
    fusion_mode: str = "weighted"
    mlp: TrainConfig = field(default_factory=TrainConfig)
    shallow_epoch_factor: float = 0.5
    hybrid: fusion_mod.HybridConfig = field(default_factory=fusion_mod.HybridConfig)


def stratified_split(y, test_frac, seed):
    """Per-class seeded shuffle; ``round(test_frac * n_class)`` of each class go to test."""
    rng = np.random.default_rng(seed)
    y = np.asarray(y)
    train, test = [], []
    for label in np.unique(y):
        idx = np.flatnonzero(y == label)
        idx = idx[rng.permutation(idx.size)]
        n_test = int(round(test_frac * idx.size))
        test.extend(idx[:n_test])
        train.extend(idx[n_test:])
    return np.sort(np.array(train, dtype=int)), np.sort(np.array(test, dtype=int))


class MinMaxScaler:
    """Scale to [0, 1] with training statistics; out-of-range values are clipped."""

    def fit(self, x):
        self.lo = x.min(axis=0)
        span = x.max(axis=0) - self.lo
        self.span = np.where(span > 0, span, 1.0)
        return self

    def transform(self, x):
        return np.clip((x - self.lo) / self.span, 0.0, 1.0)


def prepare_dataset(x, y, columns=FEATURE_NAMES, profile=IDENTITY_PROFILE, seed=0,
                    test_frac=0.3, label_mode="multiclass"):
    """Apply a privacy profile, split, and min-max normalize on the training split."""
    x_t, kept = apply_profile(np.asarray(x, dtype=float), profile, columns)
    y = np.asarray(y, dtype=int)
    if label_mode == "binary":
        y, k, attack = collapse_binary(y), 2, (1,)
    elif label_mode == "multiclass":
        k, attack = 3, (1, 2)
    else:
        raise ValueError(f"unknown label mode {label_mode!r}")
    tr, te = stratified_split(y, test_frac, seed)
    scaler = MinMaxScaler().fit(x_t[tr])
    x_test = scaler.transform(x_t[te]) if te.size else None
    return Dataset(scaler.transform(x_t[tr]), y[tr], x_test, y[te] if te.size else None,
                   kept, k, attack)


class Detector:
    """Uniform fit/predict wrapper over the MLP tiers and the hybrids."""

    def __init__(self, kind, n_inputs, n_classes=3, qubits=0, settings=None, seed=0):
        if kind not in MODEL_NAMES:
            raise ValueError(f"unknown model kind {kind!r}")
        self.kind = kind
        self.settings = settings or ModelSettings()
        self.seed = seed
        self.qubits = qubits if kind.startswith("hybrid") else 0
        s = self.settings
        tier = kind.removeprefix("hybrid-")
        self.mlp = mlp_mod.build_mlp(tier, n_inputs, n_classes, s.activation, s.dropout,
                                     derive_seed(seed, "init"))
        self.hybrid = None
        if self.qubits:
            vqc = vqc_mod.init_vqc(self.qubits, s.vqc_depth, derive_seed(seed, "init-vqc"),
                                   s.encoding, s.entanglement)
            self.hybrid = fusion_mod.init_hybrid(vqc, self.mlp)

    @property
    def name(self):
        return MODEL_NAMES[self.kind]

    def _mlp_config(self):
        cfg = replace(self.settings.mlp, seed=derive_seed(self.seed, "shuffle"))
        if self.kind.endswith("dnn-shallow"):
            cfg = replace(cfg, epochs=max(1, int(round(cfg.epochs * self.settings.shallow_epoch_factor))))
        return cfg

    def fit(self, x, y):
        if self.hybrid is None:
            self.mlp, losses = mlp_mod.fit(self.mlp, x, y, self._mlp_config())
            return {"mlp": losses}
        h = self.settings.hybrid
        cfg = replace(
            h,
            mlp=self._mlp_config(),
            vqc=replace(h.vqc, seed=derive_seed(self.seed, "shuffle-vqc")),
            fusion=replace(h.fusion, seed=derive_seed(self.seed, "shuffle-fusion")),
            finetune=replace(h.finetune, seed=derive_seed(self.seed, "shuffle-finetune")),
            fusion_mode=self.settings.fusion_mode,
        )
        self.hybrid, curves = fusion_mod.train_hybrid(self.hybrid, x, y, cfg)
        self.mlp = self.hybrid.mlp
        return curves

    def predict(self, x):
        if self.hybrid is None:
            return mlp_mod.predict(self.mlp, x)[0]
        return fusion_mod.predict_hybrid(self.hybrid, x)

    def save(self, directory, manifest=None):
        os.makedirs(directory, exist_ok=True)
        if self.hybrid is None:
            mlp_mod.save(self.mlp, os.path.join(directory, "mlp.txt"))
        else:
            fusion_mod.save_hybrid(self.hybrid, directory, manifest)

    def load(self, directory):
        if self.hybrid is None:
            self.mlp = mlp_mod.load(os.path.join(directory, "mlp.txt"))
        else:
            self.hybrid = fusion_mod.load_hybrid(directory)
            self.mlp = self.hybrid.mlp
        return self


def evaluate_model(kind, dataset, settings=None, seed=0, qubits=0, condition="raw",
                   config_hash=""):
    """Train one detector on the training split and report on the test split."""
    if dataset.x_test is None or len(dataset.x_test) == 0:
        raise ValueError("dataset has no test split")
    det = Detector(kind, dataset.x_train.shape[1], dataset.n_classes, qubits, settings, seed)
    start = time.perf_counter()
    det.fit(dataset.x_train, dataset.y_train)
    elapsed = time.perf_counter() - start
    cm = confusion(dataset.y_test, det.predict(dataset.x_test), dataset.n_classes)
    report = build_report(cm, condition, det.name, det.qubits, elapsed, seed, config_hash,
                          dataset.attack_classes)
    return report, det


def privacy_tradeoff(kind, x, y, profile, settings=None, seed=0, qubits=0, test_frac=0.3,
                     label_mode="multiclass", config_hash=""):
    """Attack F1 of a detector on raw vs privacy-transformed features, same split."""
    split_seed = derive_seed(seed, "split")
    raw = prepare_dataset(x, y, FEATURE_NAMES, IDENTITY_PROFILE, split_seed, test_frac, label_mode)
    priv = prepare_dataset(x, y, FEATURE_NAMES, profile, split_seed, test_frac, label_mode)
    r_raw, _ = evaluate_model(kind, raw, settings, seed, qubits, "raw", config_hash)
    r_priv, _ = evaluate_model(kind, priv, settings, seed, qubits, "privacy", config_hash)
    delta = {
        "attack_f1": r_priv.attack_f1 - r_raw.attack_f1,
        "macro_f1": r_priv.macro_f1 - r_raw.macro_f1,
        "accuracy": r_priv.accuracy - r_raw.accuracy,
    }
    return r_raw, r_priv, delta


def dropout_sweep(kind, dataset, rates, settings=None, seed=0, qubits=0, config_hash=""):
    """One seeded train/eval per dropout rate."""
    settings = settings or ModelSettings()
    rows = []
    for rate in rates:
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate {rate} outside [0, 1)")
        rep, _ = evaluate_model(kind, dataset, replace(settings, dropout=float(rate)), seed,
                                qubits, f"dropout={rate}", config_hash)
        rows.append({"model": rep.model, "activation": settings.activation, "rate": float(rate),
                     "macro_f1": rep.macro_f1, "weighted_f1": rep.weighted_f1,
                     "attack_f1": rep.attack_f1, "accuracy": rep.accuracy, "seed": seed,
                     "config_hash": config_hash})
    return rows


def activation_sweep(dataset, activations, rates, settings=None, kind="dnn", seed=0,
                     config_hash=""):
    """Cross product of activations and dropout rates.

    Returns (table rows, radar rows); radar rows hold one line per
    (activation, metric) with the metric value at every rate.
    """
    if not activations or not rates:
        raise ValueError("activation and rate grids must be nonempty")
    settings = settings or ModelSettings()
    table = []
    for act in activations:
        table += dropout_sweep(kind, dataset, rates, replace(settings, activation=act), seed,
                               0, config_hash)
    radar = []
    for act in activations:
        for metric in ("macro_f1", "weighted_f1", "attack_f1"):
            row = {"activation": act, "metric": metric}
            for r in table:
                if r["activation"] == act:
                    row[f"rate_{r['rate']}"] = r[metric]
            radar.append(row)
    return table, radar


def qubit_depth_benchmark(dataset, qubit_grid=(2, 4, 6), settings=None, seed=0,
                          config_hash="", condition="table2", kinds=None):
    """Classical tiers at 0 qubits and both hybrids at every qubit count."""
    rows = [(k, 0) for k in ("dnn", "nn", "dnn-shallow")]
    rows += [(k, q) for k in ("hybrid-nn", "hybrid-dnn") for q in qubit_grid]
    if kinds is not None:
        rows = [r for r in rows if r[0] in kinds]
    reports = []
    for kind, q in rows:
        rep, _ = evaluate_model(kind, dataset, settings, seed, q, condition, config_hash)
        reports.append(rep)
    return reports
