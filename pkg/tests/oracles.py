"""Independent reference implementations used by the unit and acceptance tests.

Nothing here reuses the package's internal shortcuts: gradients come from
central finite differences, metrics from counting loops.
"""
import numpy as np

from rtlsguard import dqnn, mlp
from rtlsguard import qlinalg as ql
from rtlsguard import vqc


def full_circuit_cost(network, data):
    fids = []
    for p in data:
        out = dqnn.feedforward_full_circuit(network, ql.projector(p.input))
        fids.append(np.vdot(p.target, out @ p.target).real)
    return float(np.mean(fids))


def dqnn_fd_gradient(network, data, l, j, h=1e-5):
    """dC/dt for U -> exp(i t P_a) U by central differences, one Pauli string at a time."""
    u = network.perceptron(l, j)
    n = network.widths[l - 1] + 1
    grad = []
    for label in ql.pauli_labels(n):
        p = ql.pauli_string(label)
        plus = network.replace(l, j, ql.hermitian_exp(p, h) @ u)
        minus = network.replace(l, j, ql.hermitian_exp(p, -h) @ u)
        grad.append((full_circuit_cost(plus, data) - full_circuit_cost(minus, data)) / (2 * h))
    return np.array(grad)


def relative_error(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12))


def vqc_fd_gradient(model, features, downstream, h=1e-5):
    """d/dtheta of sum(downstream * <Z>) by central differences."""
    grad = np.zeros(model.n_params)
    for k in range(model.n_params):
        p = model.params.copy()
        p[k] += h
        f_plus = np.sum(downstream * vqc.vqc_scores(model.with_params(p), features))
        p[k] -= 2 * h
        f_minus = np.sum(downstream * vqc.vqc_scores(model.with_params(p), features))
        grad[k] = (f_plus - f_minus) / (2 * h)
    return grad


def mlp_fd_gradients(model, x, y, h=1e-6):
    """Finite-difference gradient of the mean cross-entropy w.r.t. every weight and bias."""

    def loss(m):
        scores, _ = mlp.forward(m, x)
        return mlp.loss_softmax_ce(scores, y)[0]

    gw, gb = [], []
    for group, out in ((model.weights, gw), (model.biases, gb)):
        for arr in group:
            g = np.zeros_like(arr)
            for idx in np.ndindex(arr.shape):
                orig = arr[idx]
                arr[idx] = orig + h
                f_plus = loss(model)
                arr[idx] = orig - h
                f_minus = loss(model)
                arr[idx] = orig
                g[idx] = (f_plus - f_minus) / (2 * h)
            out.append(g)
    return gw, gb


def brute_metrics(cm):
    """Per-class precision, recall, F1, accuracy and F1 aggregates from explicit sums."""
    cm = np.asarray(cm)
    k = cm.shape[0]
    total = sum(cm[i, j] for i in range(k) for j in range(k))
    correct = sum(cm[i, i] for i in range(k))
    prec, rec, f1, support = [], [], [], []
    for c in range(k):
        tp = cm[c, c]
        fp = sum(cm[r, c] for r in range(k) if r != c)
        fn = sum(cm[c, r] for r in range(k) if r != c)
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        prec.append(p)
        rec.append(r)
        f1.append(2 * p * r / (p + r) if p + r else 0.0)
        support.append(tp + fn)
    macro = sum(f1) / k
    n_sup = sum(support)
    weighted = sum(f * s for f, s in zip(f1, support)) / n_sup if n_sup else macro
    return {"accuracy": correct / total, "precision": prec, "recall": rec, "f1": f1,
            "support": support, "macro_f1": macro, "weighted_f1": weighted}


def brute_attack_f1(cm, attack):
    m = brute_metrics(cm)
    sup = sum(m["support"][c] for c in attack)
    if sup == 0:
        return sum(m["f1"][c] for c in attack) / len(attack)
    return sum(m["f1"][c] * m["support"][c] for c in attack) / sup
