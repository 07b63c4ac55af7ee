"""Run configuration: nested JSON sections merged over defaults, plus seed streams.

Config files are UTF-8 JSON objects whose sections mirror ``DEFAULT_CONFIG``;
any key not present in the defaults is rejected. ``version`` must be 1.
"""
from __future__ import annotations

import copy
import hashlib
import json
import zlib

import numpy as np

CONFIG_VERSION = 1
SECRET_KEYS = {("privacy", "hash_key")}

DEFAULT_CONFIG = {
    "version": CONFIG_VERSION,
    "seed": 42,
    "output_dir": "out",
    "telemetry": {
        "repetitions": 10,
        "duration_s": 90.0,
        "rate_hz": 10.0,
        "speed": 0.4,
        "dwell_s": 3.0,
        "path_loss_exp": 2.2,
        "rssi_c": -45.0,
        "intensity_range": [0.5, 1.0],
        "attack_start_max_s": 20.0,
        "window_len": 50,
        "stride": 25,
        "distance_mode": "rssi",
        "noise": {"rssi_sigma": 2.0, "pos_sigma": 0.15, "odom_sigma": 0.01, "time_sigma": 0.002},
    },
    "privacy": {
        "deleted": [4, 5, 6],
        "encode_velocity": True,
        "encode_residual": False,
        "zone_encode": False,
        "bucketize_jitter": False,
        "zone_cell_m": 1.0,
        "jitter_quantum_s2": 1e-3,
        "hash_epoch_s": 60.0,
        "hash_key": "change-me",
        "velocity_thresholds": [0.05, 0.5],
        "time_bucket_s": 60.0,
    },
    "split": {"test_frac": 0.3, "label_mode": "multiclass"},
    "model": {
        "kind": "hybrid-dnn",
        "activation": "relu",
        "dropout": 0.3,
        "qubits": 4,
        "vqc_depth": 3,
        "encoding": "angle",
        "entanglement": "ring",
        "fusion_mode": "weighted",
    },
    "training": {
        "mlp": {"epochs": 30, "batch_size": 32, "learning_rate": 0.05, "momentum": 0.9,
                "optimizer": "sgd"},
        "shallow_epoch_factor": 0.5,
        "vqc": {"epochs": 8, "batch_size": 64, "learning_rate": 0.05, "momentum": 0.9,
                "optimizer": "sgd"},
        "fusion": {"epochs": 30, "batch_size": 64, "learning_rate": 0.02, "momentum": 0.9,
                   "optimizer": "sgd"},
        "finetune": {"epochs": 1, "batch_size": 64, "learning_rate": 0.005, "momentum": 0.9,
                     "optimizer": "sgd"},
    },
    "experiments": {
        "dropout_rates": [0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
        "activations": ["relu", "swish", "tanh"],
        "sweep_model": "dnn",
        "qubit_grid": [2, 4, 6],
        "qnn": {
            "arch": [1, 2, 1],
            "pairs": 10,
            "steps": 1000,
            "eps": 0.01,
            "eta": 1.0,
            "target_seed": 7,
            "eval_pairs": 50,
            "pair_grid": [1, 2, 4, 8],
            "n_total": 10,
            "corrupt_grid": [0, 2, 5, 8, 10],
        },
    },
}


class ConfigError(ValueError):
    def __init__(self, message, section="", key=""):
        self.section = section
        self.key = key
        super().__init__(message)


def _merge(base, override, path=()):
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = path + (key,)
        if key not in base:
            raise ConfigError(f"unknown key {'.'.join(where)!r}", ".".join(path), key)
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"section {'.'.join(where)!r} must be an object",
                                  ".".join(path), key)
            out[key] = _merge(base[key], value, where)
        else:
            out[key] = value
    return out


def load_config(path=None, overrides=()):
    """Defaults, then the file (if any), then ``section.key=value`` overrides.

    Override values are parsed as JSON when possible, else taken as strings.
    Returns (config dict, list of applied override strings); secret values in
    that list are replaced by ``<redacted>``.
    """
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: malformed JSON at line {exc.lineno}: {exc.msg}") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: top level must be an object")
        if doc.get("version", CONFIG_VERSION) != CONFIG_VERSION:
            raise ConfigError(f"unsupported config version {doc.get('version')!r}", "", "version")
        cfg = _merge(cfg, doc)
    applied = []
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        nested = value
        for part in reversed(key.split(".")):
            nested = {part: nested}
        cfg = _merge(cfg, nested)
        secret = tuple(key.split(".")) in SECRET_KEYS
        applied.append(f"{key}=<redacted>" if secret else item)
    return cfg, applied


def public_config(cfg):
    """Copy with secrets removed, safe to embed in reports."""
    out = copy.deepcopy(cfg)
    for section, key in SECRET_KEYS:
        out.get(section, {}).pop(key, None)
    return out


def config_digest(cfg, overrides=()):
    doc = {"config": public_config(cfg), "overrides": list(overrides)}
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def derive_seed(seed, name):
    """Independent integer seed for a named sub-stream of the global seed."""
    ss = np.random.SeedSequence([int(seed), zlib.crc32(name.encode())])
    return int(ss.generate_state(1)[0])
