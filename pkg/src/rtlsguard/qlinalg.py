"""Dense complex linear algebra for few-qubit systems.

Conventions: qubit 0 is the most significant bit of a computational-basis
index (big-endian), so ``kron(a, b)`` places ``a`` on the lower-numbered
qubits. States are plain numpy arrays; pure states are 1-D amplitude vectors,
mixed states are 2-D density matrices.
"""
from __future__ import annotations

import functools
import itertools

import numpy as np

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
POSITIVITY_SLACK = 1e-9
UNITARY_TOL = 1e-9

I2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = np.stack([I2, SIGMA_X, SIGMA_Y, SIGMA_Z])


class InvariantError(ValueError):
    """A numeric invariant (unitarity, trace, positivity, ...) does not hold."""


class DensityMatrixError(InvariantError):
    def __init__(self, invariant, violation, message=None):
        self.invariant = invariant
        self.violation = float(violation)
        super().__init__(message or f"{invariant} violated by {self.violation:.3e}")


def n_qubits_of(dim):
    n = int(dim).bit_length() - 1
    if dim < 1 or (1 << n) != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    return n


def tensor_product(a, b):
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def kron_all(mats):
    return functools.reduce(np.kron, mats, np.ones((1, 1), dtype=complex))


def basis_state(index, n_qubits):
    psi = np.zeros(1 << n_qubits, dtype=complex)
    psi[index] = 1.0
    return psi


def projector(psi):
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def zero_state_dm(n_qubits):
    rho = np.zeros((1 << n_qubits, 1 << n_qubits), dtype=complex)
    rho[0, 0] = 1.0
    return rho


def is_hermitian(m, tol=HERMITIAN_TOL):
    m = np.asarray(m)
    return m.shape[0] == m.shape[1] and np.max(np.abs(m - m.conj().T), initial=0.0) <= tol


def unitarity_error(u):
    u = np.asarray(u)
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))


def is_unitary(u, tol=UNITARY_TOL):
    u = np.asarray(u)
    return u.ndim == 2 and u.shape[0] == u.shape[1] and unitarity_error(u) <= tol


def partial_trace(rho, qubit_count, keep):
    """Reduced density matrix on the qubits in ``keep``.

    Kept qubits retain their relative order. Leading batch axes are allowed:
    ``rho`` may have shape (..., 2^n, 2^n). Keeping every qubit returns the
    input unchanged.
    """
    rho = np.asarray(rho, dtype=complex)
    keep = sorted(set(int(q) for q in keep))
    if not keep:
        raise ValueError("keep set must be nonempty")
    if keep[0] < 0 or keep[-1] >= qubit_count:
        raise ValueError(f"qubit index out of range for {qubit_count} qubits: {keep}")
    dim = 1 << qubit_count
    if rho.shape[-2:] != (dim, dim):
        raise ValueError(f"matrix shape {rho.shape} does not match {qubit_count} qubits")
    if len(keep) == qubit_count:
        return rho
    batch = rho.shape[:-2]
    t = rho.reshape(batch + (2,) * (2 * qubit_count))
    # row axes 0..n-1, column axes n..2n-1
    row = list(range(qubit_count))
    col = list(range(qubit_count, 2 * qubit_count))
    for q in range(qubit_count):
        if q not in keep:
            col[q] = row[q]
    out = [row[q] for q in keep] + [col[q] for q in keep]
    d = 1 << len(keep)
    red = np.einsum(t, [Ellipsis] + row + col, [Ellipsis] + out)
    return red.reshape(batch + (d, d))


def embed_operator(op, targets, qubit_count):
    """Lift ``op`` acting on ``targets`` (in that order) to the full register."""
    op = np.asarray(op, dtype=complex)
    targets = list(targets)
    k = len(targets)
    if op.shape != (1 << k, 1 << k):
        raise ValueError(f"operator shape {op.shape} does not act on {k} qubits")
    if len(set(targets)) != k or min(targets) < 0 or max(targets) >= qubit_count:
        raise ValueError(f"invalid target qubits {targets}")
    rest = [q for q in range(qubit_count) if q not in targets]
    full = np.kron(op, np.eye(1 << len(rest), dtype=complex))
    # current qubit order of `full` is targets + rest; permute back to 0..n-1
    order = targets + rest
    perm = [order.index(q) for q in range(qubit_count)]
    t = full.reshape([2] * (2 * qubit_count))
    t = t.transpose(perm + [p + qubit_count for p in perm])
    return t.reshape(1 << qubit_count, 1 << qubit_count)


def hermitian_exp(k, eps):
    """Return exp(i * eps * k) for Hermitian ``k`` via eigendecomposition."""
    k = np.asarray(k, dtype=complex)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise ValueError("generator must be a square matrix")
    if not is_hermitian(k):
        raise ValueError(
            f"generator is not Hermitian (max deviation {np.max(np.abs(k - k.conj().T)):.3e})"
        )
    w, v = np.linalg.eigh((k + k.conj().T) / 2)
    return (v * np.exp(1j * eps * w)) @ v.conj().T


def fidelity(target, rho):
    """Overlap <phi|rho|phi> of a pure target with a density matrix."""
    phi = np.asarray(target, dtype=complex)
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (phi.size, phi.size):
        raise ValueError(f"dimension mismatch: state {phi.size}, density {rho.shape}")
    val = np.vdot(phi, rho @ phi)
    if abs(val.imag) > 1e-10:
        raise InvariantError(f"fidelity has imaginary residue {val.imag:.3e}")
    return float(min(max(val.real, 0.0), 1.0))


def conjugate_by_unitary(rho, u):
    rho = np.asarray(rho, dtype=complex)
    u = np.asarray(u, dtype=complex)
    if u.shape != rho.shape:
        raise ValueError(f"dimension mismatch: rho {rho.shape}, u {u.shape}")
    if not is_unitary(u):
        raise InvariantError(f"matrix is not unitary (error {unitarity_error(u):.3e})")
    return u @ rho @ u.conj().T


def validate_density(m, trace_tol=TRACE_TOL, herm_tol=HERMITIAN_TOL, eig_slack=POSITIVITY_SLACK):
    """Check the density-matrix invariants and return ``m`` as a complex array.

    Raises DensityMatrixError naming the first failing invariant and its
    measured violation.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DensityMatrixError("square", 0.0, f"matrix of shape {m.shape} is not square")
    n_qubits_of(m.shape[0])
    herm = float(np.max(np.abs(m - m.conj().T)))
    if herm > herm_tol:
        raise DensityMatrixError("hermiticity", herm)
    tr = np.trace(m).real
    if abs(tr - 1.0) > trace_tol:
        raise DensityMatrixError("trace", abs(tr - 1.0), f"trace = {tr:.12g}, expected 1")
    lo = float(np.linalg.eigvalsh((m + m.conj().T) / 2)[0])
    if lo < -eig_slack:
        raise DensityMatrixError("positivity", -lo, f"negative eigenvalue {lo:.3e}")
    return m


def random_unitary(dim, rng):
    """Haar-random unitary: QR of a complex Ginibre matrix with phase-fixed R."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def random_state(dim, rng):
    psi = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return psi / np.linalg.norm(psi)


def random_density(dim, rng, rank=None):
    rank = dim if rank is None else rank
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_hermitian(dim, rng):
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return (a + a.conj().T) / 2


def nearest_unitary(u):
    """Polar projection onto the unitary group."""
    w, _, vh = np.linalg.svd(u)
    return w @ vh


def pauli_labels(n_qubits):
    return ["".join(s) for s in itertools.product("IXYZ", repeat=n_qubits)]


def pauli_string(label):
    return kron_all([PAULIS["IXYZ".index(c)] for c in label])


def pauli_coefficients(m, n_qubits):
    """Tr(P_a m) for every Pauli string P_a, in ``pauli_labels`` order.

    Contracts one qubit at a time, so the cost stays O(n 4^n) per entry
    instead of forming each 2^n x 2^n Pauli string.
    """
    t = np.asarray(m, dtype=complex).reshape([2] * (2 * n_qubits))
    # move to interleaved (r0, c0, r1, c1, ...) axes
    order = [ax for q in range(n_qubits) for ax in (q, q + n_qubits)]
    t = t.transpose(order)
    for q in range(n_qubits):
        # Tr(P m) = sum_{r,c} P[c, r] m[r, c]
        t = np.tensordot(PAULIS, t, axes=([2, 1], [q, q + 1]))
        t = np.moveaxis(t, 0, q)
    return t.reshape(-1)


def pauli_assemble(coeffs, n_qubits):
    """Sum_a coeffs[a] * P_a over Pauli strings in ``pauli_labels`` order."""
    t = np.asarray(coeffs, dtype=complex).reshape([4] * n_qubits)
    for _ in range(n_qubits):
        # consume leading Pauli index, append (row, col) at the end
        t = np.tensordot(t, PAULIS, axes=([0], [0]))
    # axes now (r0, c0, r1, c1, ...)
    rows = [2 * q for q in range(n_qubits)]
    cols = [2 * q + 1 for q in range(n_qubits)]
    d = 1 << n_qubits
    return t.transpose(rows + cols).reshape(d, d)
