import numpy as np
import pytest
import scipy.linalg

from blochsim import oracle
from blochsim.bloch import PauliObservable, bloch_from_density, density_from_bloch, pauli_flat_index, zero_state
from blochsim.channels import amplitude_damping, channel_superop
from blochsim.kernels import superop_from_unitary
from blochsim.lindblad import (
    JumpOperator,
    adjoint_evolve,
    build_generator,
    dissipator_superop,
    evolve,
    expectation_gradients,
    grad_generator,
    grad_parameter_timedep,
    hamiltonian_superop,
    time_grid,
)

from conftest import max_abs, random_bloch

LOWER = np.array([[0, 1], [0, 0]], dtype=complex)  # |0><1|


def random_hamiltonian(n, rng, terms=6):
    words = {"".join(rng.choice(list("IXYZ"), n)) for _ in range(terms)}
    return PauliObservable([(float(rng.normal()), w) for w in words], n)


def random_generator(n, rng):
    H = random_hamiltonian(n, rng)
    jumps = []
    for _ in range(2):
        m = int(rng.integers(1, min(n, 2) + 1))
        targets = rng.choice(n, m, replace=False)
        op = 0.5 * (rng.normal(size=(2**m, 2**m)) + 1j * rng.normal(size=(2**m, 2**m)))
        jumps.append((op, targets))
    return build_generator(H, jumps, n)


def dense_parts(gen):
    n = gen.n_qubits
    H = gen.hamiltonian.to_matrix() if gen.hamiltonian is not None else np.zeros((2**n, 2**n))
    ops = []
    for j in gen.jumps:
        ops.append(np.sqrt(j.rate) * oracle.embed(j.matrix, list(j.targets), n))
    return H, ops


def test_zero_generator():
    gen = build_generator(PauliObservable([], 2), [], 2)
    assert not gen.matrix.any()


def test_precession_signs():
    omega = 0.9
    gen = build_generator(PauliObservable([(omega / 2, "Z")]))
    expected = np.zeros((4, 4))
    expected[1, 2], expected[2, 1] = -omega, omega
    assert max_abs(gen.matrix, expected) < 1e-15
    # and it is the derivative of the unitary superop at t = 0
    h = 1e-6
    z = np.diag([1, -1]).astype(complex)
    up = superop_from_unitary(scipy.linalg.expm(-1j * omega / 2 * z * h)).matrix
    dn = superop_from_unitary(scipy.linalg.expm(1j * omega / 2 * z * h)).matrix
    assert max_abs(gen.matrix, (up - dn) / (2 * h)) < 1e-8


@pytest.mark.parametrize("n", [1, 2, 3])
def test_generator_matches_dense_rhs(n, rng):
    gen = random_generator(n, rng)
    H, ops = dense_parts(gen)
    assert max_abs(gen.matrix[0], 0) < 1e-14
    for _ in range(3):
        rho = oracle.random_density(n, rng)
        drho = oracle.lindblad_rhs(rho, H, ops)
        assert max_abs(gen.matrix @ bloch_from_density(rho), bloch_from_density(drho)) < 1e-12


def test_hamiltonian_superop_is_antisymmetric(rng):
    L = hamiltonian_superop(random_hamiltonian(3, rng))
    assert max_abs(L, -L.T) < 1e-14


def test_dissipator_lifting_matches_oracle(rng):
    op = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    D = dissipator_superop(op, [2, 0], 3)
    rho = oracle.random_density(3, rng)
    ref = oracle.lindblad_rhs(rho, np.zeros((8, 8)), [oracle.embed(op, [2, 0], 3)])
    assert max_abs(D @ bloch_from_density(rho), bloch_from_density(ref)) < 1e-12


@pytest.mark.parametrize("t", [0.0, 0.4, 1.3, 5.0])
def test_amplitude_damping_closed_form(t):
    g = 0.8
    gen = build_generator(None, [(LOWER, [0], g)], 1)
    prop = scipy.linalg.expm(gen.matrix * t)
    assert max_abs(prop, channel_superop(amplitude_damping(1 - np.exp(-g * t))).matrix) < 1e-12


def test_expm_rk4_and_dense_agree_amplitude_damping(rng):
    g, tf = 0.8, 1.3
    gen = build_generator(None, [(LOWER, [0], g)], 1)
    rho0 = oracle.random_density(1, rng)
    r0 = bloch_from_density(rho0)
    a = evolve(r0, gen, tf).final
    b = evolve(r0, gen, tf, "rk4", 1e-3).final
    c = bloch_from_density(oracle.evolve_dense(rho0, np.zeros((2, 2)), [np.sqrt(g) * LOWER], tf))
    assert max_abs(a, b) < 1e-6
    assert max_abs(a, c) < 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_random_two_qubit_expm_vs_rk4(seed):
    rng = np.random.default_rng(seed)
    gen = random_generator(2, rng)
    r0 = random_bloch(2, rng)
    tf = rng.uniform(0.5, 2.0)
    assert max_abs(evolve(r0, gen, tf).final, evolve(r0, gen, tf, "rk4", 1e-3).final) < 1e-6


def test_trace_conserved_long_times(rng):
    gen = random_generator(2, rng)
    r0 = random_bloch(2, rng)
    res = evolve(r0, gen, 10.0, times=np.linspace(0, 10, 11))
    assert np.max(np.abs(res.states[:, 0] - 1)) < 1e-9
    # the end state is still a valid density matrix
    assert np.min(np.linalg.eigvalsh(density_from_bloch(res.final))) > -1e-9


def test_trivial_evolutions(rng):
    r0 = random_bloch(2, rng)
    gen = random_generator(2, rng)
    for method in ("expm", "rk4"):
        assert max_abs(evolve(r0, gen, 0.0, method).final, r0) == 0
    zero = np.zeros((16, 16))
    assert max_abs(evolve(r0, zero, 3.0, "rk4", 0.1).final, r0) == 0


def test_rk4_order():
    g, tf = 0.8, 1.3
    gen = build_generator(None, [(LOWER, [0], g)], 1)
    r0 = np.array([1.0, 0.6, 0.0, -0.8])
    exact = evolve(r0, gen, tf).final
    errs = [np.max(np.abs(evolve(r0, gen, tf, "rk4", dt).final - exact)) for dt in (0.2, 0.1, 0.05)]
    for a, b in zip(errs, errs[1:]):
        assert 8 <= a / b <= 32


def test_time_grid_covers_final_time():
    grid = time_grid(1.0, 0.3)
    assert len(grid) == 5 and grid[-1] == 1.0
    assert len(time_grid(1.0, 0.25)) == 5
    with pytest.raises(ValueError):
        time_grid(1.0, 0.0)


def test_adjoint_matches_transposed_exponential(rng):
    gen = random_generator(2, rng)
    fwd = evolve(random_bloch(2, rng), gen, 1.5, "rk4", 1e-3)
    rbar = rng.normal(size=16)
    adj = adjoint_evolve(rbar, gen, fwd)
    assert max_abs(adj.states[0], scipy.linalg.expm(gen.matrix.T * 1.5) @ rbar) < 1e-6
    assert max_abs(adj.states[-1], rbar) == 0


def test_adjoint_constant_for_zero_generator(rng):
    fwd = evolve(random_bloch(1, rng), np.zeros((4, 4)), 1.0, "rk4", 0.1)
    rbar = rng.normal(size=4)
    adj = adjoint_evolve(rbar, np.zeros((4, 4)), fwd)
    assert max_abs(adj.states, np.broadcast_to(rbar, adj.states.shape)) == 0


def test_duality_invariant(rng):
    gen = random_generator(2, rng)
    fwd = evolve(random_bloch(2, rng), gen, 2.0, "rk4", 1e-3)
    adj = adjoint_evolve(rng.normal(size=16), gen, fwd)
    pairing = np.einsum("ti,ti->t", adj.states, fwd.states)
    assert np.max(np.abs(pairing - pairing[0])) < 1e-8


def test_heisenberg_picture_consistency(rng):
    gen = random_generator(2, rng)
    tf = 1.2
    fwd = evolve(random_bloch(2, rng), gen, tf, "rk4", 1e-3)
    e = np.zeros(16)
    e[pauli_flat_index("XZ")] = 1.0
    adj = adjoint_evolve(e, gen, fwd)
    for i in (0, 300, 900):
        t = fwd.times[i]
        assert max_abs(adj.states[i], scipy.linalg.expm(gen.matrix.T * (tf - t)) @ e) < 1e-8


def test_adjoint_needs_rk4_forward(rng):
    gen = random_generator(1, rng)
    with pytest.raises(ValueError):
        adjoint_evolve(np.ones(4), gen, evolve(zero_state(1), gen, 1.0))
    with pytest.raises(ValueError):
        adjoint_evolve(np.ones(4), gen, None)


def test_grad_generator_trivial_cases(rng):
    r0, rbar = random_bloch(1, rng), rng.normal(size=4)
    zero = np.zeros((4, 4))
    fwd = evolve(r0, zero, 0.0, "rk4")
    assert not grad_generator(fwd, adjoint_evolve(rbar, zero, fwd)).any()
    fwd = evolve(r0, zero, 0.7, "rk4", 0.01)
    lbar = grad_generator(fwd, adjoint_evolve(rbar, zero, fwd))
    assert max_abs(lbar, 0.7 * np.outer(rbar, r0)) < 1e-14


def test_grad_generator_grid_mismatch(rng):
    gen = random_generator(1, rng)
    a = evolve(zero_state(1), gen, 1.0, "rk4", 0.1)
    b = evolve(zero_state(1), gen, 1.0, "rk4", 0.05)
    with pytest.raises(ValueError):
        grad_generator(a, adjoint_evolve(np.ones(4), gen, b))


def test_grad_generator_vs_finite_differences(rng):
    gen = random_generator(2, rng)
    r0 = random_bloch(2, rng)
    tf, dt, h = 1.0, 1e-4, 1e-5
    e = np.zeros(16)
    e[pauli_flat_index("IZ")] = 1.0
    out = expectation_gradients(gen, r0, e, tf, dt)
    lbar = out["generator_bar"]
    worst = 0.0
    for j in range(1, 16):
        for k in range(16):
            d = np.zeros((16, 16))
            d[j, k] = h
            fd = (e @ evolve(r0, gen.matrix + d, tf).final - e @ evolve(r0, gen.matrix - d, tf).final) / (2 * h)
            worst = max(worst, abs(lbar[j, k] - fd) / max(abs(fd), 1e-8))
    assert worst < 1e-5


def test_initial_state_gradient_vs_finite_differences(rng):
    gen = random_generator(2, rng)
    r0 = random_bloch(2, rng)
    e = rng.normal(size=16)
    out = expectation_gradients(gen, r0, e, 1.0, 1e-3)
    prop = scipy.linalg.expm(gen.matrix)
    fd = np.array([(e @ prop @ (r0 + d) - e @ prop @ (r0 - d)) / 2e-5 for d in 1e-5 * np.eye(16)])
    assert np.max(np.abs(out["r0_bar"] - fd) / np.maximum(np.abs(fd), 1e-8)) < 1e-6


def test_named_rate_gradient_vs_finite_differences():
    def cost(gamma):
        gen = build_generator(PauliObservable([(0.3, "X")]), [JumpOperator(LOWER, (0,), "gamma")], 1,
                              params={"gamma": gamma})
        return gen, evolve(r0, gen, 1.0).final[3]

    r0 = zero_state(1)
    r0[3] = -1.0  # start in |1>
    gen, _ = cost(0.6)
    e = np.zeros(4)
    e[3] = 1.0
    grad = expectation_gradients(gen, r0, e, 1.0, 1e-3)["params"]["gamma"]
    fd = (cost(0.6 + 1e-5)[1] - cost(0.6 - 1e-5)[1]) / 2e-5
    assert abs(grad - fd) / abs(fd) < 1e-5


def test_hamiltonian_parameter_gradient(rng):
    n = 2
    base = random_hamiltonian(n, rng)
    piece = PauliObservable([(1.0, "XX"), (0.5, "ZI")])
    jumps = [(LOWER, [1], 0.3)]

    def cost(theta):
        gen = build_generator(base, jumps, n, params={"theta": theta}, hamiltonian_params={"theta": piece})
        return gen, e @ evolve(r0, gen, 0.8).final

    r0 = random_bloch(n, rng)
    e = rng.normal(size=16)
    gen, _ = cost(0.4)
    grad = expectation_gradients(gen, r0, e, 0.8, 1e-3)["params"]["theta"]
    fd = (cost(0.4 + 1e-5)[1] - cost(0.4 - 1e-5)[1]) / 2e-5
    assert abs(grad - fd) / abs(fd) < 1e-5


def test_linear_parametrisation_chain_rule(rng):
    L0 = random_generator(2, rng).matrix
    theta = 0.7
    fwd = evolve(random_bloch(2, rng), theta * L0, 1.0, "rk4", 1e-2)
    adj = adjoint_evolve(rng.normal(size=16), theta * L0, fwd)
    assert abs(grad_parameter_timedep(L0, fwd, adj) - np.sum(grad_generator(fwd, adj) * L0)) < 1e-10
    assert grad_parameter_timedep(np.zeros((16, 16)), fwd, adj) == 0
    with pytest.raises(ValueError):
        grad_parameter_timedep(None, fwd, adj)


def test_time_dependent_parameter_gradient(rng):
    # L(t) = L_H + theta * cos(t) * D
    H = random_hamiltonian(1, rng, 3)
    LH = build_generator(H).matrix
    D = build_generator(None, [(LOWER, [0])], 1).matrix
    r0 = random_bloch(1, rng)
    e = np.array([0.0, 0.3, -0.5, 1.0])
    tf, dt = 1.5, 1e-3

    def gen(theta):
        return lambda t: LH + theta * np.cos(t) * D

    def cost(theta):
        return e @ evolve(r0, gen(theta), tf, "rk4", dt).final

    theta = 0.9
    fwd = evolve(r0, gen(theta), tf, "rk4", dt)
    adj = adjoint_evolve(e, gen(theta), fwd)
    grad = grad_parameter_timedep(lambda t: np.cos(t) * D, fwd, adj)
    fd = (cost(theta + 1e-5) - cost(theta - 1e-5)) / 2e-5
    assert abs(grad - fd) / abs(fd) < 1e-5


def test_callable_generator_rejects_expm():
    with pytest.raises(ValueError):
        evolve(zero_state(1), lambda t: np.zeros((4, 4)), 1.0, "expm")


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(H=PauliObservable([(1.0, "ZZ")]), jumps=[(LOWER, [2])], n_qubits=2),
        dict(H=PauliObservable([(1.0, "ZZ")]), jumps=[], n_qubits=3),
        dict(H=None, jumps=[(np.eye(4), [0])], n_qubits=2),
        dict(H=PauliObservable([(1.0, "Z" * 9)]), jumps=[], n_qubits=9),
    ],
)
def test_build_generator_errors(kwargs):
    with pytest.raises(ValueError):
        build_generator(kwargs["H"], kwargs["jumps"], kwargs["n_qubits"])


def test_missing_named_rate():
    with pytest.raises(KeyError):
        build_generator(None, [JumpOperator(LOWER, (0,), "g")], 1)


def test_negative_final_time():
    with pytest.raises(ValueError):
        evolve(zero_state(1), np.zeros((4, 4)), -1.0)
