"""Confusion matrices, class-wise metrics and F1 aggregates.

Zero denominators never produce NaN: the metric is 0 and the matching
``undefined`` flag is set.
"""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field

import numpy as np


def confusion(true_labels, predicted_labels, k):
    """Counts with rows = true label, columns = predicted label."""
    t = np.asarray(true_labels, dtype=int).reshape(-1)
    p = np.asarray(predicted_labels, dtype=int).reshape(-1)
    if t.size != p.size:
        raise ValueError(f"length mismatch: {t.size} true vs {p.size} predicted labels")
    if t.size and (min(t.min(), p.min()) < 0 or max(t.max(), p.max()) >= k):
        raise ValueError(f"label out of range for {k} classes")
    cm = np.zeros((k, k), dtype=np.int64)
    np.add.at(cm, (t, p), 1)
    return cm


@dataclass
class ClassMetrics:
    accuracy: float
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    precision_undefined: np.ndarray
    recall_undefined: np.ndarray
    f1_undefined: np.ndarray


def _safe_div(num, den):
    den = np.asarray(den, dtype=float)
    undefined = den == 0
    out = np.where(undefined, 0.0, np.asarray(num, dtype=float) / np.where(undefined, 1.0, den))
    return out, undefined


def class_metrics(cm):
    """One-vs-rest precision, recall and F1 per class, plus accuracy."""
    cm = np.asarray(cm)
    total = cm.sum()
    if total == 0:
        raise ValueError("class metrics need a nonempty confusion matrix")
    tp = np.diag(cm).astype(float)
    fp = cm.sum(axis=0) - tp
    fn = cm.sum(axis=1) - tp
    precision, p_undef = _safe_div(tp, tp + fp)
    recall, r_undef = _safe_div(tp, tp + fn)
    f1, f_undef = _safe_div(2 * precision * recall, precision + recall)
    return ClassMetrics(
        accuracy=float(tp.sum() / total),
        precision=precision, recall=recall, f1=f1,
        support=cm.sum(axis=1),
        precision_undefined=p_undef, recall_undefined=r_undef, f1_undefined=f_undef,
    )


def _weighted(values, weights):
    w = np.asarray(weights, dtype=float)
    if w.sum() == 0:
        return float(np.mean(values))
    return float(np.sum(np.asarray(values) * w) / w.sum())


def aggregate_f1(cm, attack_classes=(1, 2)):
    """(macro F1, support-weighted F1, attack F1).

    Attack F1 is the support-weighted mean over ``attack_classes`` only; when
    none of them occur it falls back to their unweighted mean.
    """
    attack = sorted(set(int(c) for c in attack_classes))
    if not attack:
        raise ValueError("attack class set must be nonempty")
    k = np.asarray(cm).shape[0]
    if attack[0] < 0 or attack[-1] >= k:
        raise ValueError(f"attack classes {attack} out of range for {k} classes")
    m = class_metrics(cm)
    macro = float(np.mean(m.f1))
    weighted = _weighted(m.f1, m.support)
    attack_f1 = _weighted(m.f1[attack], m.support[attack])
    return macro, weighted, attack_f1


def collapse_binary(labels):
    """Normal (0) vs any attack (1)."""
    return (np.asarray(labels, dtype=int) > 0).astype(int)


@dataclass
class EvaluationReport:
    condition: str
    model: str
    qubits: int
    accuracy: float
    precision: list
    recall: list
    f1: list
    macro_precision: float
    macro_recall: float
    macro_f1: float
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    attack_f1: float
    train_time_s: float
    seed: int
    config_hash: str
    confusion: list = field(default_factory=list)
    undefined: list = field(default_factory=list)

    def row(self):
        """Flat CSV row; per-class lists become ``precision_c0`` style columns."""
        d = asdict(self)
        out = {}
        for key, value in d.items():
            if key in ("confusion", "undefined"):
                continue
            if isinstance(value, list):
                for i, v in enumerate(value):
                    out[f"{key}_c{i}"] = _fmt(v)
            else:
                out[key] = _fmt(value)
        return out


def _fmt(v):
    if isinstance(v, float):
        return repr(round(v, 12))
    return v


def build_report(cm, condition, model, qubits, train_time_s, seed, config_hash,
                 attack_classes=(1, 2)):
    m = class_metrics(cm)
    macro, weighted, attack = aggregate_f1(cm, attack_classes)
    undefined = [int(i) for i in np.nonzero(m.precision_undefined | m.recall_undefined
                                            | m.f1_undefined)[0]]
    return EvaluationReport(
        condition=condition, model=model, qubits=int(qubits),
        accuracy=m.accuracy,
        precision=[float(v) for v in m.precision],
        recall=[float(v) for v in m.recall],
        f1=[float(v) for v in m.f1],
        macro_precision=float(np.mean(m.precision)),
        macro_recall=float(np.mean(m.recall)),
        macro_f1=macro,
        weighted_precision=_weighted(m.precision, m.support),
        weighted_recall=_weighted(m.recall, m.support),
        weighted_f1=weighted,
        attack_f1=attack,
        train_time_s=float(train_time_s),
        seed=int(seed), config_hash=config_hash,
        confusion=np.asarray(cm).tolist(), undefined=undefined,
    )


def write_reports_csv(reports, path, exclude=()):
    rows = [r.row() if isinstance(r, EvaluationReport) else dict(r) for r in reports]
    write_rows_csv(rows, path, exclude)


def write_rows_csv(rows, path, exclude=()):
    """CSV with the union of row keys as header (first-seen order)."""
    header = []
    for r in rows:
        for key in r:
            if key not in header and key not in exclude:
                header.append(key)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=header, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("skipped" if r.get(k, "") is None else _fmt(r.get(k, "")))
                        for k in header})


def write_json(doc, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (set, frozenset)):
        return sorted(o)
    if isinstance(o, EvaluationReport):
        return asdict(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")
