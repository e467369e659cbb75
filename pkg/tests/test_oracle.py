import numpy as np
import pytest
import scipy.linalg

from blochsim import oracle

from conftest import max_abs

X = np.array([[0, 1], [1, 0]], dtype=complex)


def test_conjugate_identity_and_x(rng):
    rho = oracle.random_density(2, rng)
    assert max_abs(oracle.conjugate(rho, np.eye(2), [1]), rho) < 1e-15
    zero = np.diag([1.0, 0.0])
    assert max_abs(oracle.conjugate(zero, X, [0]), np.diag([0.0, 1.0])) == 0


@pytest.mark.parametrize("targets", [[0], [2], [0, 1], [2, 0], [1, 2, 0]])
def test_conjugate_matches_embed(targets, rng):
    n = 3
    u = oracle.random_unitary(2 ** len(targets), rng)
    rho = oracle.random_density(n, rng)
    full = oracle.embed(u, targets, n)
    assert max_abs(oracle.conjugate(rho, u, targets), full @ rho @ full.conj().T) < 1e-13


def test_conjugate_round_trip(rng):
    u = oracle.random_unitary(4, rng)
    rho = oracle.random_density(3, rng)
    out = oracle.conjugate(oracle.conjugate(rho, u, [0, 2]), u.conj().T, [0, 2])
    assert max_abs(out, rho) < 1e-13


def test_kraus_apply_identity_and_depolarizing(rng):
    rho = oracle.random_density(2, rng)
    assert max_abs(oracle.kraus_apply(rho, [np.eye(2)], [0]), rho) < 1e-15
    paulis = [np.eye(2), X, np.array([[0, -1j], [1j, 0]]), np.diag([1, -1])]
    out = oracle.kraus_apply(rho, [p / 2 for p in paulis], [0])
    assert max_abs(out, np.kron(oracle.partial_trace_dense(rho, [1]), np.eye(2) / 2)) < 1e-13


def test_kraus_apply_preserves_trace(rng):
    g = rng.standard_normal(2)
    ops = [np.array([[1, 0], [0, np.sqrt(1 - g[0] ** 2 / 10)]]), np.array([[0, abs(g[0]) / np.sqrt(10)], [0, 0]])]
    rho = oracle.random_density(3, rng)
    assert np.trace(oracle.kraus_apply(rho, ops, [1])).real == pytest.approx(1.0, abs=1e-12)


def test_controlled_matrix():
    cnot = oracle.controlled_matrix(1, X)
    assert np.array_equal(cnot.real, np.eye(4)[[0, 1, 3, 2]])
    toffoli = oracle.controlled_matrix(2, X)
    assert np.array_equal(toffoli.real, np.eye(8)[[0, 1, 2, 3, 4, 5, 7, 6]])
    assert max_abs(toffoli.conj().T @ toffoli, np.eye(8)) == 0


def test_lindblad_rhs_is_traceless(rng):
    h = oracle.random_hermitian(4, rng)
    jumps = [rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))]
    rho = oracle.random_density(2, rng)
    assert abs(np.trace(oracle.lindblad_rhs(rho, h, jumps))) < 1e-12
    assert max_abs(oracle.lindblad_rhs(rho, np.zeros((4, 4)), []), 0) == 0


def test_lindblad_superop_matches_rhs(rng):
    h = oracle.random_hermitian(4, rng)
    jumps = [rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))]
    rho = oracle.random_density(2, rng)
    vec = oracle.lindblad_superop_dense(h, jumps) @ rho.reshape(-1)
    assert max_abs(vec.reshape(4, 4), oracle.lindblad_rhs(rho, h, jumps)) < 1e-12


def test_expm_basic(rng):
    assert max_abs(oracle.expm(np.zeros((3, 3))), np.eye(3)) == 0
    d = rng.standard_normal(4)
    assert max_abs(oracle.expm(np.diag(d)), np.diag(np.exp(d))) < 1e-13


@pytest.mark.parametrize("scale", [0.1, 1.0, 10.0])
def test_expm_inverse_and_scipy(scale, rng):
    a = scale * (rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6)))
    e = oracle.expm(a)
    assert max_abs(e @ oracle.expm(-a), np.eye(6)) < 1e-10 * max(1.0, np.linalg.norm(e) ** 2)
    assert np.max(np.abs(e - scipy.linalg.expm(a))) < 1e-10 * np.max(np.abs(e))


def test_matrix_functions(rng):
    rho = oracle.random_density(2, rng)
    s = oracle.psd_sqrt(rho)
    assert max_abs(s @ s, rho) < 1e-13
    assert oracle.trace_norm(rho) == pytest.approx(1.0)
    assert oracle.von_neumann_entropy(np.eye(4) / 4) == pytest.approx(np.log(4))
