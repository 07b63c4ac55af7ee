"""Shallow variational circuit branch: encoding, R_y/R_z + CZ ansatz, exact <Z> readout.

Statevectors are simulated exactly (no shot noise) and batched along a leading
axis. Qubit 0 is the most significant bit of the basis index.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

ENCODINGS = ("angle", "amplitude")
ENTANGLEMENTS = ("linear", "ring")
NORM_SLACK = 1e-9
SHIFT = np.pi / 2


@dataclass(frozen=True)
class VqcModel:
    n_qubits: int
    depth: int
    params: np.ndarray  # flat, ordered (layer, qubit, [ry, rz])
    encoding: str = "angle"
    entanglement: str = "ring"

    def __post_init__(self):
        if self.n_qubits < 1 or self.depth < 0:
            raise ValueError("n_qubits must be >= 1 and depth >= 0")
        if self.encoding not in ENCODINGS:
            raise ValueError(f"unknown encoding {self.encoding!r}")
        if self.entanglement not in ENTANGLEMENTS:
            raise ValueError(f"unknown entanglement {self.entanglement!r}")
        params = np.asarray(self.params, dtype=float).reshape(-1)
        if params.size != self.n_params:
            raise ValueError(f"expected {self.n_params} parameters, got {params.size}")
        if not np.all(np.isfinite(params)):
            raise ValueError("VQC parameters must be finite")
        object.__setattr__(self, "params", params)

    @property
    def n_params(self):
        return self.depth * self.n_qubits * 2

    def with_params(self, params):
        return replace(self, params=np.asarray(params, dtype=float))


def init_vqc(n_qubits, depth=3, seed=0, encoding="angle", entanglement="ring"):
    rng = np.random.default_rng(seed)
    params = rng.uniform(-np.pi, np.pi, size=depth * n_qubits * 2)
    return VqcModel(n_qubits, depth, params, encoding, entanglement)


def entangling_pairs(n_qubits, entanglement):
    pairs = [(q, q + 1) for q in range(n_qubits - 1)]
    # on two qubits the closing edge duplicates (0, 1); CZ twice would cancel
    if entanglement == "ring" and n_qubits > 2:
        pairs.append((n_qubits - 1, 0))
    return pairs


def _bits(n_qubits):
    idx = np.arange(1 << n_qubits)
    return np.array([(idx >> (n_qubits - 1 - q)) & 1 for q in range(n_qubits)])


def _cz_diagonal(n_qubits, entanglement):
    bits = _bits(n_qubits)
    diag = np.ones(1 << n_qubits)
    for a, b in entangling_pairs(n_qubits, entanglement):
        diag = diag * (1 - 2 * (bits[a] & bits[b]))
    return diag


def ry(theta):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz(theta):
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def _apply_1q(states, gate, q, n_qubits):
    b = states.shape[0]
    t = states.reshape(b, 1 << q, 2, 1 << (n_qubits - q - 1))
    return np.einsum("ij,bajc->baic", gate, t).reshape(b, -1)


def _as_batch(features):
    x = np.asarray(features, dtype=float)
    return (x[None, :], True) if x.ndim == 1 else (x, False)


def angle_encode(features, n_qubits):
    """R_y(pi * x_i) on qubit i mod n_qubits, starting from |0...0>.

    Accepts one feature vector or a batch (rows). Features must lie in [0, 1].
    """
    x, single = _as_batch(features)
    if np.any(x < -NORM_SLACK) or np.any(x > 1 + NORM_SLACK):
        raise ValueError("angle encoding needs features normalized to [0, 1]")
    angles = np.zeros((x.shape[0], n_qubits))
    for i in range(x.shape[1]):  # rotations on a shared qubit compose additively
        angles[:, i % n_qubits] += np.pi * x[:, i]
    state = np.ones((x.shape[0], 1), dtype=complex)
    for q in range(n_qubits):
        local = np.stack([np.cos(angles[:, q] / 2), np.sin(angles[:, q] / 2)], axis=1)
        state = np.einsum("bi,bj->bij", state, local).reshape(x.shape[0], -1)
    return state[0] if single else state


def amplitude_encode(features, n_qubits):
    """Zero-pad to 2^n_qubits amplitudes and L2-normalize."""
    x, single = _as_batch(features)
    dim = 1 << n_qubits
    if x.shape[1] > dim:
        raise ValueError(f"{x.shape[1]} features do not fit in {n_qubits} qubits")
    norms = np.linalg.norm(x, axis=1)
    if np.any(norms == 0):
        raise ValueError("amplitude encoding of an all-zero feature vector")
    state = np.zeros((x.shape[0], dim), dtype=complex)
    state[:, : x.shape[1]] = x / norms[:, None]
    return state[0] if single else state


def encode(model, features):
    if model.encoding == "angle":
        return angle_encode(features, model.n_qubits)
    return amplitude_encode(features, model.n_qubits)


def _ansatz(states, params, n_qubits, depth, entanglement):
    params = np.asarray(params).reshape(depth, n_qubits, 2)
    cz = _cz_diagonal(n_qubits, entanglement)
    for layer in range(depth):
        for q in range(n_qubits):
            states = _apply_1q(states, ry(params[layer, q, 0]), q, n_qubits)
            states = _apply_1q(states, rz(params[layer, q, 1]), q, n_qubits)
        states = states * cz
    return states


def apply_ansatz(state, model):
    state = np.asarray(state, dtype=complex)
    single = state.ndim == 1
    batch = state[None, :] if single else state
    if batch.shape[1] != 1 << model.n_qubits:
        raise ValueError(f"state dimension {batch.shape[1]} does not match {model.n_qubits} qubits")
    out = _ansatz(batch, model.params, model.n_qubits, model.depth, model.entanglement)
    return out[0] if single else out


def expectations(state, n_qubits):
    """Exact <Z_q> for every qubit q."""
    state = np.asarray(state)
    probs = np.abs(state) ** 2
    z = 1 - 2 * _bits(n_qubits)  # (n_qubits, dim)
    return probs @ z.T


def vqc_scores(model, features):
    """Encode, run the ansatz, read out per-qubit <Z>. Batched over rows."""
    return expectations(apply_ansatz(encode(model, features), model), model.n_qubits)


def _scores_from_encoded(model, encoded, params):
    out = _ansatz(encoded, params, model.n_qubits, model.depth, model.entanglement)
    return expectations(out, model.n_qubits)


def param_shift_grad(model, features, downstream_grad, encoded=None):
    """Chain ``downstream_grad`` (d loss / d <Z_q>) through every rotation angle.

    Uses the exact two-point shift (f(t + pi/2) - f(t - pi/2)) / 2. With a batch
    of feature rows, ``downstream_grad`` has one row per sample and the
    per-sample gradients are summed in row order.
    """
    enc = encode(model, features) if encoded is None else encoded
    enc = enc[None, :] if enc.ndim == 1 else enc
    g = np.asarray(downstream_grad, dtype=float).reshape(enc.shape[0], model.n_qubits)
    grad = np.zeros(model.n_params)
    if not np.any(g):
        return grad
    for k in range(model.n_params):
        shifted = model.params.copy()
        shifted[k] += SHIFT
        plus = _scores_from_encoded(model, enc, shifted)
        shifted[k] -= 2 * SHIFT
        minus = _scores_from_encoded(model, enc, shifted)
        grad[k] = np.sum(g * (plus - minus)) / 2
    return grad
