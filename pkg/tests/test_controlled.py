import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blochsim import oracle
from blochsim.bloch import basis_state, bloch_from_density
from blochsim.controlled import (
    PROJ1_ANTISYM,
    PROJ1_SYM,
    ControlledGateSpec,
    apply_controlled,
    cnot,
    controlled_block_derivatives,
    controlled_block_superop,
    controlled_local_unitary,
    cz,
    enumerate_sa_terms,
    sa_tensor_mpo,
    toffoli,
)
from blochsim.kernels import (
    GateSpec,
    antisym_superop,
    apply,
    gate_unitary,
    sym_superop,
)

from conftest import max_abs

METHODS = ["terms", "mpo"]


def dense_reference(spec, rho):
    u = gate_unitary(spec.gate)
    cu = oracle.controlled_matrix(len(spec.controls), u)
    # Local order inside controlled_matrix: target bits low, controls high.
    return oracle.conjugate(rho, cu, list(spec.gate.targets) + list(spec.controls))


CASES = [
    (5, cnot(0, 1)),
    (5, cnot(4, 2)),
    (5, cz(3, 1)),
    (5, ControlledGateSpec((2,), GateSpec("Rz", (0.731,), (0,)))),
    (5, ControlledGateSpec((0,), GateSpec("Rz", (-2.1,), (4,)))),
    (5, toffoli(0, 1, 2)),
    (5, toffoli(4, 1, 3)),
    (5, ControlledGateSpec((0, 3, 4), GateSpec("X", (), (1,)))),
    (4, ControlledGateSpec((3, 1, 0), GateSpec("X", (), (2,)))),
    (4, ControlledGateSpec((1,), GateSpec("Rxx", (0.4,), (3, 0)))),
    (3, ControlledGateSpec((1, 2), GateSpec("H", (), (0,)))),
]


@pytest.mark.parametrize("method", METHODS)
@pytest.mark.parametrize("n,spec", CASES)
def test_controlled_matches_dense_oracle(n, spec, method, rng):
    for _ in range(3):
        rho = oracle.random_density(n, rng)
        out = apply_controlled(bloch_from_density(rho), spec, method=method)
        assert max_abs(out, bloch_from_density(dense_reference(spec, rho))) < 1e-12


@pytest.mark.parametrize("method", METHODS)
def test_controlled_custom_unitary(method, rng):
    u = oracle.random_unitary(4, rng)
    spec = ControlledGateSpec((1, 3), GateSpec("unitary", (), (2, 0), u))
    rho = oracle.random_density(4, rng)
    out = apply_controlled(bloch_from_density(rho), spec, method=method)
    assert max_abs(out, bloch_from_density(dense_reference(spec, rho))) < 1e-12


def test_cnot_truth_table():
    for bits, expected in [("00", "00"), ("01", "11"), ("10", "10"), ("11", "01")]:
        # control qubit 0 (rightmost bit), target qubit 1
        out = apply_controlled(basis_state(bits), cnot(0, 1))
        assert max_abs(out, basis_state(expected)) < 1e-15


def test_sign_and_kind_of_terms():
    terms = enumerate_sa_terms(3)
    assert len(terms) == 8
    for t in terms:
        s = sum(t.bits)
        assert t.sign == (-1) ** int(np.ceil(s / 2))
        assert t.target_kind == s % 2


def test_term_expansion_of_symmetric_sandwich(rng):
    # Dense check of S_{P^{(x)k} (x) (U - I)} against the signed sum of products.
    u = oracle.random_unitary(2, rng)
    k = 2
    proj = np.diag([0.0, 1.0])
    big = np.kron(np.kron(proj, proj), u - np.eye(2))
    expected = sym_superop(big).matrix
    s_u = sym_superop(u - np.eye(2)).matrix
    a_u = antisym_superop(u - np.eye(2)).matrix
    total = np.zeros_like(expected)
    for term in enumerate_sa_terms(k):
        mat = s_u if term.target_kind == 0 else a_u
        for bit in term.bits:
            # bits[i] acts on control i; control i sits above the target, later controls higher.
            mat = np.kron((PROJ1_ANTISYM if bit else PROJ1_SYM).matrix, mat)
        total += term.sign * mat
    assert max_abs(total, expected) < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 2), st.integers(1, 2))
def test_tensor_product_sandwich_identities(seed, mf, mg):
    rng = np.random.default_rng(seed)
    f = rng.standard_normal((2**mf, 2**mf)) + 1j * rng.standard_normal((2**mf, 2**mf))
    g = rng.standard_normal((2**mg, 2**mg)) + 1j * rng.standard_normal((2**mg, 2**mg))
    sfg = sym_superop(np.kron(f, g)).matrix
    afg = antisym_superop(np.kron(f, g)).matrix
    sf, af = sym_superop(f).matrix, antisym_superop(f).matrix
    sg, ag = sym_superop(g).matrix, antisym_superop(g).matrix
    assert max_abs(sfg, np.kron(sf, sg) - np.kron(af, ag)) < 1e-12
    assert max_abs(afg, np.kron(sf, ag) + np.kron(af, sg)) < 1e-12


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_bond_dimension_two_recursion(seed, count):
    rng = np.random.default_rng(seed)
    factors = [rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)) for _ in range(count)]
    full = np.ones((1, 1))
    for g in factors:
        full = np.kron(g, full)
    s, a = sa_tensor_mpo(factors)
    assert max_abs(s, sym_superop(full).matrix) < 1e-12
    assert max_abs(a, antisym_superop(full).matrix) < 1e-12


def test_block_superop_and_derivatives(rng):
    spec = ControlledGateSpec((2,), GateSpec("Ry", (0.3,), (0,)))
    rho = oracle.random_density(3, rng)
    r = bloch_from_density(rho)
    block = controlled_block_superop(spec)
    assert block.is_orthogonal()
    assert max_abs(apply(r, block, spec.qubits), apply_controlled(r, spec)) < 1e-13
    (d,) = controlled_block_derivatives(spec)
    h = 1e-6
    up = controlled_block_superop(spec.with_gate(spec.gate.with_params((0.3 + h,)))).matrix
    dn = controlled_block_superop(spec.with_gate(spec.gate.with_params((0.3 - h,)))).matrix
    assert max_abs(d, (up - dn) / (2 * h)) < 1e-8


def test_local_unitary_matches_oracle():
    u = gate_unitary(GateSpec("Rz", (0.4,)))
    spec = ControlledGateSpec((1, 2), GateSpec("Rz", (0.4,), (0,)))
    assert max_abs(controlled_local_unitary(spec), oracle.controlled_matrix(2, u)) == 0


@pytest.mark.parametrize(
    "controls,targets",
    [((), (0,)), ((1, 1), (0,)), ((0,), (0,))],
)
def test_controlled_spec_validation(controls, targets):
    with pytest.raises(ValueError):
        ControlledGateSpec(controls, GateSpec("X", (), targets))


def test_rejects_qubits_out_of_range():
    with pytest.raises(ValueError, match="out of range"):
        apply_controlled(basis_state("00"), cnot(0, 2))


def test_unknown_method():
    with pytest.raises(ValueError):
        apply_controlled(basis_state("00"), cnot(0, 1), method="dense")


def test_all_two_qubit_placements_cnot(rng):
    rho = oracle.random_density(3, rng)
    r = bloch_from_density(rho)
    for c, t in itertools.permutations(range(3), 2):
        spec = cnot(c, t)
        ref = bloch_from_density(dense_reference(spec, rho))
        assert max_abs(apply_controlled(r, spec), ref) < 1e-12
        assert max_abs(apply_controlled(r, spec, method="mpo"), ref) < 1e-12
