"""Layered quantum perceptron networks trained on fidelity.

A network with layer widths [m0, m1, ..., mL] holds one perceptron per node of
layers 1..L. Perceptron j of layer l is a unitary on all m_{l-1} qubits of the
previous layer plus qubit j of layer l. Inside a layer workspace the previous
layer occupies qubits 0..m_{l-1}-1 and layer l the qubits that follow.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import qlinalg as ql

log = logging.getLogger(__name__)

MAX_WORKSPACE_QUBITS = 10
REUNITARIZE_TOL = 1e-8

DEFAULT_EPS = 0.01
DEFAULT_ETA = 1.0
DEFAULT_STEPS = 1000


@dataclass(frozen=True)
class TrainingPair:
    input: np.ndarray
    target: np.ndarray


@dataclass(frozen=True)
class DqnnNetwork:
    widths: tuple
    layers: tuple  # layers[l - 1][j] -> perceptron unitary

    def perceptron(self, l, j):
        return self.layers[l - 1][j]

    @property
    def n_perceptrons(self):
        return sum(len(layer) for layer in self.layers)

    @property
    def total_qubits(self):
        return sum(self.widths)

    def replace(self, l, j, u):
        layers = [list(layer) for layer in self.layers]
        layers[l - 1][j] = u
        return DqnnNetwork(self.widths, tuple(tuple(layer) for layer in layers))


def check_architecture(widths):
    widths = tuple(int(w) for w in widths)
    if len(widths) < 2:
        raise ValueError("architecture needs at least an input and an output layer")
    if min(widths) < 1:
        raise ValueError(f"layer widths must be positive: {widths}")
    for a, b in zip(widths, widths[1:]):
        if a + b > MAX_WORKSPACE_QUBITS:
            raise ValueError(
                f"layer workspace {a}+{b} qubits exceeds the cap of {MAX_WORKSPACE_QUBITS}"
            )
    return widths


def init_network(widths, seed):
    """Haar-random perceptrons for every (layer, node), deterministic per seed."""
    widths = check_architecture(widths)
    rng = np.random.default_rng(seed)
    layers = []
    for m_in, m_out in zip(widths, widths[1:]):
        dim = 1 << (m_in + 1)
        layers.append(tuple(ql.random_unitary(dim, rng) for _ in range(m_out)))
    return DqnnNetwork(widths, tuple(layers))


def network_from_unitaries(widths, layers):
    widths = check_architecture(widths)
    layers = tuple(tuple(np.asarray(u, dtype=complex) for u in layer) for layer in layers)
    for l, (m_in, layer) in enumerate(zip(widths, layers), start=1):
        if len(layer) != widths[l]:
            raise ValueError(f"layer {l} has {len(layer)} perceptrons, expected {widths[l]}")
        for u in layer:
            if u.shape != (1 << (m_in + 1),) * 2:
                raise ValueError(f"perceptron in layer {l} has shape {u.shape}")
            if not ql.is_unitary(u):
                raise ql.InvariantError(f"perceptron in layer {l} is not unitary")
    return DqnnNetwork(widths, layers)


def _perceptron_targets(m_in, j):
    return list(range(m_in)) + [m_in + j]


def _layer_operators(layer, m_in):
    """Perceptron unitaries lifted to the (m_in + m_out)-qubit layer workspace."""
    n = m_in + len(layer)
    return [ql.embed_operator(u, _perceptron_targets(m_in, j), n) for j, u in enumerate(layer)]


def _layer_unitary(layer, m_in):
    ops = _layer_operators(layer, m_in)
    total = np.eye(ops[0].shape[0], dtype=complex)
    for op in ops:  # U_1 acts first
        total = op @ total
    return total


def _with_ancilla(rho, m_out):
    anc = ql.zero_state_dm(m_out)
    if rho.ndim == 2:
        return np.kron(rho, anc)
    return np.einsum("nab,cd->nacbd", rho, anc).reshape(
        rho.shape[0], rho.shape[1] * anc.shape[0], rho.shape[2] * anc.shape[1]
    )


def _check_layer_input(state, layer):
    m_out = len(layer)
    m_in = layer[0].shape[0].bit_length() - 2
    if state.shape[-1] != 1 << m_in:
        raise ValueError(f"state dimension {state.shape[-1]} does not match {m_in}-qubit layer input")
    return m_in, m_out


def layer_channel(state, layer):
    """Apply one layer map: append |0..0>, run U_1 then U_2 ..., trace out the inputs."""
    state = np.asarray(state, dtype=complex)
    m_in, m_out = _check_layer_input(state, layer)
    u = _layer_unitary(layer, m_in)
    work = u @ _with_ancilla(state, m_out) @ u.conj().T
    return ql.partial_trace(work, m_in + m_out, range(m_in, m_in + m_out))


def adjoint_channel(chi, layer):
    """Heisenberg-picture dual of ``layer_channel``: <0| U^dag (I (x) chi) U |0>."""
    chi = np.asarray(chi, dtype=complex)
    m_in = layer[0].shape[0].bit_length() - 2
    m_out = len(layer)
    if chi.shape[-1] != 1 << m_out:
        raise ValueError(f"adjoint input dimension {chi.shape[-1]} does not match {m_out} qubits")
    u = _layer_unitary(layer, m_in)
    # isometry V = U (I (x) |0>) keeps the columns whose ancilla bits are all zero
    v = u[:, :: 1 << m_out]
    lifted = np.kron(np.eye(1 << m_in), chi) if chi.ndim == 2 else np.stack(
        [np.kron(np.eye(1 << m_in), c) for c in chi]
    )
    return v.conj().T @ lifted @ v


def _as_density(state):
    state = np.asarray(state, dtype=complex)
    return ql.projector(state) if state.ndim == 1 else state


def feedforward(network, rho_in):
    """Propagate through every layer; returns (output state, [rho^0, ..., rho^L])."""
    rho = _as_density(rho_in)
    if rho.shape[-1] != 1 << network.widths[0]:
        raise ValueError(
            f"input dimension {rho.shape[-1]} does not match {network.widths[0]} input qubits"
        )
    states = [rho]
    for layer in network.layers:
        rho = layer_channel(rho, layer)
        states.append(rho)
    return rho, states


def _permutation_lift(u, targets, n):
    """Independent lift of ``u`` to n qubits via an explicit basis permutation."""
    k = len(targets)
    rest = [q for q in range(n) if q not in targets]
    order = list(targets) + rest
    dim = 1 << n
    perm = np.zeros((dim, dim))
    for idx in range(dim):
        # idx enumerates basis states in `order`; find the natural-order index
        nat = 0
        for pos, q in enumerate(order):
            bit = (idx >> (n - 1 - pos)) & 1
            nat |= bit << (n - 1 - q)
        perm[nat, idx] = 1.0
    return perm @ np.kron(u, np.eye(1 << (n - k))) @ perm.T


def feedforward_full_circuit(network, rho_in):
    """Single global unitary over input, hidden and output qubits, then one partial trace."""
    n = network.total_qubits
    if n > MAX_WORKSPACE_QUBITS:
        raise ValueError(f"full circuit needs {n} qubits, cap is {MAX_WORKSPACE_QUBITS}")
    rho = _as_density(rho_in)
    offsets = np.concatenate([[0], np.cumsum(network.widths)]).astype(int)
    total = np.eye(1 << n, dtype=complex)
    for l, layer in enumerate(network.layers, start=1):
        prev = list(range(offsets[l - 1], offsets[l]))
        for j, u in enumerate(layer):
            total = _permutation_lift(u, prev + [offsets[l] + j], n) @ total
    anc = ql.zero_state_dm(n - network.widths[0])
    work = total @ np.kron(rho, anc) @ total.conj().T
    return ql.partial_trace(work, n, range(offsets[-2], offsets[-1]))


def cost(network, data):
    """Mean fidelity of network outputs with the target states."""
    if len(data) == 0:
        raise ValueError("cost needs at least one training pair")
    rho_in = np.stack([ql.projector(p.input) for p in data])
    out, _ = feedforward(network, rho_in)
    tgt = np.stack([p.target for p in data])
    fids = np.einsum("ni,nij,nj->n", tgt.conj(), out, tgt).real
    return float(np.mean(fids))


def _backward(network, data):
    """Forward states and adjoint-propagated targets for a batch of pairs."""
    rho_in = np.stack([ql.projector(p.input) for p in data])
    _, states = feedforward(network, rho_in)
    chi = np.stack([ql.projector(p.target) for p in data])
    chis = [chi]
    for layer in reversed(network.layers[1:]):
        chi = adjoint_channel(chi, layer)
        chis.append(chi)
    chis.reverse()  # chis[l - 1] is the adjoint state entering layer l from above
    return states, chis


def perceptron_gradients(network, data):
    """dC/dt for U -> exp(i t P_a) U over all Pauli strings P_a, per perceptron.

    Returns ``grads[l - 1][j]``, a real vector in ``ql.pauli_labels`` order.
    The identity component is always zero (global phase).
    """
    if len(data) == 0:
        raise ValueError("gradient needs at least one training pair")
    states, chis = _backward(network, data)
    grads = []
    for l, layer in enumerate(network.layers, start=1):
        m_in, m_out = network.widths[l - 1], network.widths[l]
        n = m_in + m_out
        ops = _layer_operators(layer, m_in)
        a = _with_ancilla(states[l - 1], m_out)
        eye_in = np.eye(1 << m_in)
        m = np.stack([np.kron(eye_in, c) for c in chis[l - 1]])
        # A_j: state after perceptrons 1..j; M_j: observable pulled back through j+1..m_out
        after = []
        for op in ops:
            a = op @ a @ op.conj().T
            after.append(a)
        pulled = [None] * m_out
        for j in reversed(range(m_out)):
            pulled[j] = m
            m = ops[j].conj().T @ m @ ops[j]
        layer_grads = []
        for j in range(m_out):
            comm = 1j * (after[j] @ pulled[j] - pulled[j] @ after[j])
            y = ql.partial_trace(comm, n, _perceptron_targets(m_in, j)).mean(axis=0)
            layer_grads.append(ql.pauli_coefficients(y, m_in + 1).real)
        grads.append(layer_grads)
    return grads


def _generator(g, n_qubits, eta):
    coeffs = eta * np.asarray(g, dtype=float).copy()
    coeffs[0] = 0.0
    k = ql.pauli_assemble(coeffs, n_qubits)
    return (k + k.conj().T) / 2


def update_direction(network, data, l, j, eta=DEFAULT_ETA):
    """Hermitian generator K_j^l = eta * sum_a (dC/dt_a) P_a for perceptron (l, j)."""
    g = perceptron_gradients(network, data)[l - 1][j]
    return _generator(g, network.widths[l - 1] + 1, eta)


def _reunitarize(u):
    if ql.unitarity_error(u) > REUNITARIZE_TOL:
        return ql.nearest_unitary(u)
    return u


def train_step(network, data, eps=DEFAULT_EPS, eta=DEFAULT_ETA):
    """One simultaneous update U -> exp(i eps K) U of every perceptron.

    Returns (new network, cost of the new network).
    """
    if eps < 0:
        raise ValueError("step size must be non-negative")
    if eps == 0:
        return network, cost(network, data)
    grads = perceptron_gradients(network, data)
    layers = []
    for l, layer in enumerate(network.layers, start=1):
        k_qubits = network.widths[l - 1] + 1
        layers.append(
            tuple(
                _reunitarize(ql.hermitian_exp(_generator(g, k_qubits, eta), eps) @ u)
                for g, u in zip(grads[l - 1], layer)
            )
        )
    new = DqnnNetwork(network.widths, tuple(layers))
    return new, cost(new, data)


@dataclass
class TrainResult:
    network: DqnnNetwork
    costs: list = field(default_factory=list)


def train(network, data, steps=DEFAULT_STEPS, eps=DEFAULT_EPS, eta=DEFAULT_ETA, log_every=0):
    """Run ``steps`` updates; ``costs`` holds the cost before training and after each step."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    costs = [cost(network, data)]
    for step in range(1, steps + 1):
        network, c = train_step(network, data, eps, eta)
        costs.append(c)
        if log_every and step % log_every == 0:
            log.info("step %d cost %.6f", step, c)
    return TrainResult(network, costs)


def gen_unitary_dataset(v, n_pairs, seed):
    """Haar-random inputs paired with their images under ``v``."""
    v = np.asarray(v, dtype=complex)
    if not ql.is_unitary(v):
        raise ValueError("target transformation must be unitary")
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(n_pairs):
        psi = ql.random_state(v.shape[0], rng)
        pairs.append(TrainingPair(psi, v @ psi))
    return pairs


def corrupt_pairs(data, n_corrupt, seed):
    """Replace ``n_corrupt`` randomly chosen pairs with independent random pairs."""
    n = len(data)
    if not 0 <= n_corrupt <= n:
        raise ValueError(f"cannot corrupt {n_corrupt} of {n} pairs")
    # separate sub-stream so a shared seed with gen_unitary_dataset cannot replay its states
    rng = np.random.default_rng([seed, 1])
    mask = np.zeros(n, dtype=bool)
    mask[rng.choice(n, size=n_corrupt, replace=False)] = True
    out = []
    for pair, bad in zip(data, mask):
        if bad:
            pair = TrainingPair(
                ql.random_state(pair.input.size, rng), ql.random_state(pair.target.size, rng)
            )
        out.append(pair)
    return out, mask


def controlled_unitary_channel(rho_in, branch_unitaries):
    """Classical-quantum channel sum_a <a|rho|a> U(a)|0><0|U(a)^dag."""
    rho_in = np.asarray(rho_in, dtype=complex)
    branches = [np.asarray(u, dtype=complex) for u in branch_unitaries]
    if len(branches) != rho_in.shape[0]:
        raise ValueError(f"{len(branches)} branches for input dimension {rho_in.shape[0]}")
    out = np.zeros_like(branches[0])
    for p, u in zip(np.diagonal(rho_in).real, branches):
        col = u[:, 0]
        out += p * np.outer(col, col.conj())
    return out


def random_target_unitary(n_qubits, seed):
    return ql.random_unitary(1 << n_qubits, np.random.default_rng(seed))


def _check_target(widths, v):
    if v.shape[0] != 1 << widths[0] or widths[0] != widths[-1]:
        raise ValueError("unitary learning needs equal input and output widths matching the target")


def generalization_experiment(
    widths,
    target_seed,
    n_pairs_grid,
    eval_pairs=50,
    steps=DEFAULT_STEPS,
    eps=DEFAULT_EPS,
    eta=DEFAULT_ETA,
    seed=0,
):
    """Held-out cost after training on n pairs of one random unitary, per grid point."""
    widths = check_architecture(widths)
    if not n_pairs_grid:
        raise ValueError("pair grid must be nonempty")
    v = random_target_unitary(widths[0], target_seed)
    _check_target(widths, v)
    held_out = gen_unitary_dataset(v, eval_pairs, seed + 1)
    rows = []
    for n in n_pairs_grid:
        if n < 1:
            raise ValueError("empty training set: n_pairs must be >= 1")
        data = gen_unitary_dataset(v, n, seed)
        res = train(init_network(widths, seed), data, steps, eps, eta)
        rows.append(
            {
                "n_pairs": int(n),
                "cost": cost(res.network, held_out),
                "train_cost": res.costs[-1],
                "seed": seed,
                "steps": steps,
                "eps": eps,
                "eta": eta,
            }
        )
    return rows


def robustness_experiment(
    widths,
    target_seed,
    n_total,
    corrupt_grid,
    steps=DEFAULT_STEPS,
    eps=DEFAULT_EPS,
    eta=DEFAULT_ETA,
    seed=0,
):
    """Cost on the uncorrupted pairs after training on a partly corrupted set.

    A grid point that corrupts every pair has no clean subset; its row carries
    ``cost=None`` and ``status="skipped"``.
    """
    widths = check_architecture(widths)
    if not corrupt_grid:
        raise ValueError("corruption grid must be nonempty")
    v = random_target_unitary(widths[0], target_seed)
    _check_target(widths, v)
    clean = gen_unitary_dataset(v, n_total, seed)
    rows = []
    for n_bad in corrupt_grid:
        data, mask = corrupt_pairs(clean, n_bad, seed + 2)
        row = {"n_corrupt": int(n_bad), "cost": None, "status": "skipped",
               "seed": seed, "steps": steps, "eps": eps, "eta": eta}
        if n_bad < n_total:
            res = train(init_network(widths, seed), data, steps, eps, eta)
            kept = [p for p, bad in zip(data, mask) if not bad]
            row.update(cost=cost(res.network, kept), status="ok")
        rows.append(row)
    return rows
