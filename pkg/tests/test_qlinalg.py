import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rtlsguard import qlinalg as ql

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def brute_partial_trace(rho, n, keep):
    """Sum over basis states of the traced qubits, index by index."""
    keep = sorted(keep)
    out_dim = 1 << len(keep)
    out = np.zeros((out_dim, out_dim), dtype=complex)
    for i in range(1 << n):
        for j in range(1 << n):
            bi = [(i >> (n - 1 - q)) & 1 for q in range(n)]
            bj = [(j >> (n - 1 - q)) & 1 for q in range(n)]
            if any(bi[q] != bj[q] for q in range(n) if q not in keep):
                continue
            a = int("".join(str(bi[q]) for q in keep) or "0", 2)
            b = int("".join(str(bj[q]) for q in keep) or "0", 2)
            out[a, b] += rho[i, j]
    return out


def test_tensor_product_dimensions():
    assert ql.tensor_product(np.eye(2), np.eye(4)).shape == (8, 8)
    v = ql.tensor_product(np.array([1, 0]), np.array([0, 1]))
    assert np.array_equal(v, [0, 1, 0, 0])


def test_partial_trace_of_product_state(rng):
    a = ql.random_density(2, rng)
    b = ql.random_density(4, rng)
    np.testing.assert_allclose(ql.partial_trace(np.kron(a, b), 3, [0]), a, atol=1e-12)
    np.testing.assert_allclose(ql.partial_trace(np.kron(a, b), 3, [1, 2]), b, atol=1e-12)


def test_bell_state_reduces_to_maximally_mixed():
    bell = np.array([1, 0, 0, 1]) / np.sqrt(2)
    np.testing.assert_allclose(ql.partial_trace(ql.projector(bell), 2, [0]), np.eye(2) / 2)


def test_partial_trace_keep_all_is_identity(rng):
    rho = ql.random_density(8, rng)
    np.testing.assert_array_equal(ql.partial_trace(rho, 3, [0, 1, 2]), rho)


@given(seed=seeds, n=st.integers(1, 4), data=st.data())
def test_partial_trace_matches_brute_force(seed, n, data):
    keep = data.draw(st.sets(st.integers(0, n - 1), min_size=1, max_size=n))
    rho = ql.random_density(1 << n, np.random.default_rng(seed))
    np.testing.assert_allclose(ql.partial_trace(rho, n, keep), brute_partial_trace(rho, n, keep),
                               atol=1e-12)


@given(seed=seeds, n=st.integers(1, 4))
def test_partial_trace_preserves_trace(seed, n):
    rho = ql.random_density(1 << n, np.random.default_rng(seed))
    red = ql.partial_trace(rho, n, [0])
    assert abs(np.trace(red) - 1) < 1e-12
    ql.validate_density(red)


def test_partial_trace_batched(rng):
    rhos = np.stack([ql.random_density(4, rng) for _ in range(3)])
    out = ql.partial_trace(rhos, 2, [1])
    for r, o in zip(rhos, out):
        np.testing.assert_allclose(o, ql.partial_trace(r, 2, [1]))


def test_partial_trace_rejects_bad_qubit():
    with pytest.raises(ValueError):
        ql.partial_trace(np.eye(4) / 4, 2, [2])


@given(seed=seeds, eps=st.floats(-3, 3, allow_nan=False))
def test_hermitian_exp_is_unitary(seed, eps):
    k = ql.random_hermitian(4, np.random.default_rng(seed))
    assert ql.is_unitary(ql.hermitian_exp(k, eps))


def test_hermitian_exp_zero_is_identity(rng):
    k = ql.random_hermitian(4, rng)
    np.testing.assert_allclose(ql.hermitian_exp(k, 0.0), np.eye(4), atol=1e-14)


def test_hermitian_exp_pauli_z():
    u = ql.hermitian_exp(ql.SIGMA_Z, np.pi / 2)
    np.testing.assert_allclose(u, np.diag([1j, -1j]), atol=1e-14)


def test_hermitian_exp_rejects_non_hermitian():
    with pytest.raises(ValueError):
        ql.hermitian_exp(np.array([[0, 1], [0, 0]]), 0.1)


def test_fidelity_values():
    zero, one = np.array([1, 0]), np.array([0, 1])
    assert ql.fidelity(zero, ql.projector(zero)) == pytest.approx(1.0)
    assert ql.fidelity(zero, ql.projector(one)) == pytest.approx(0.0)
    assert ql.fidelity(zero, np.eye(2) / 2) == pytest.approx(0.5)


@given(seed=seeds)
def test_fidelity_in_unit_interval(seed):
    r = np.random.default_rng(seed)
    f = ql.fidelity(ql.random_state(4, r), ql.random_density(4, r))
    assert 0.0 <= f <= 1.0


def test_validate_density_names_invariant():
    with pytest.raises(ql.DensityMatrixError) as e:
        ql.validate_density(np.eye(2))
    assert e.value.invariant == "trace"
    with pytest.raises(ql.DensityMatrixError) as e:
        ql.validate_density(np.array([[0.5, 0.1], [0.3, 0.5]]))
    assert e.value.invariant == "hermiticity"
    with pytest.raises(ql.DensityMatrixError) as e:
        ql.validate_density(np.diag([1.2, -0.2]))
    assert e.value.invariant == "positivity"


def test_conjugate_rejects_non_unitary(rng):
    with pytest.raises(ql.InvariantError):
        ql.conjugate_by_unitary(ql.random_density(2, rng), np.array([[1, 1], [0, 1]]))


@given(seed=seeds, n=st.integers(1, 3))
def test_pauli_roundtrip(seed, n):
    m = ql.random_hermitian(1 << n, np.random.default_rng(seed))
    coeffs = ql.pauli_coefficients(m, n)
    assert np.allclose(coeffs.imag, 0, atol=1e-12)
    np.testing.assert_allclose(ql.pauli_assemble(coeffs, n) / (1 << n), m, atol=1e-12)


def test_pauli_coefficients_against_trace_definition(rng):
    m = ql.random_hermitian(4, rng)
    coeffs = ql.pauli_coefficients(m, 2)
    for label, c in zip(ql.pauli_labels(2), coeffs):
        expected = np.trace(ql.pauli_string(label) @ m)
        assert abs(c - expected) < 1e-12


def test_embed_operator_matches_kron():
    x = ql.SIGMA_X
    np.testing.assert_allclose(ql.embed_operator(x, [0], 2), np.kron(x, np.eye(2)))
    np.testing.assert_allclose(ql.embed_operator(x, [1], 2), np.kron(np.eye(2), x))


def test_nearest_unitary_recovers_unitary(rng):
    u = ql.random_unitary(4, rng)
    np.testing.assert_allclose(ql.nearest_unitary(u + 1e-6 * rng.normal(size=(4, 4))), u,
                               atol=1e-5)
    assert ql.is_unitary(ql.nearest_unitary(u + 1e-3))
