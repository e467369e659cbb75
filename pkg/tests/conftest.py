import numpy as np
import pytest

from blochsim import oracle
from blochsim.bloch import bloch_from_density


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_bloch(n, rng, rank=None):
    return bloch_from_density(oracle.random_density(n, rng, rank))


def max_abs(a, b):
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


ONE_QUBIT_ROTATIONS = ["Rx", "Ry", "Rz", "PhaseShift"]
TWO_QUBIT_ROTATIONS = ["Rxx", "Ryy", "Rzz"]


def random_circuit(rng, n=4, n_params=10):
    """Random mixed circuit with ``n_params`` named parameters.

    Rotations, two-qubit rotations, a controlled rotation, a shared scaled
    parameter, a parametrised depolarizing channel and CNOTs sprinkled in.
    """
    from blochsim.circuit import Circuit, Param

    c = Circuit(n)
    names = [f"t{i}" for i in range(n_params)]
    kinds = ["1q"] * (n_params - 6) + ["2q"] * 3 + ["crot", "channel", "shared"]
    rng.shuffle(kinds)
    c.controlled([0], "X", [], [1])
    for name, kind in zip(names, kinds):
        q = [int(x) for x in rng.permutation(n)]
        if kind == "1q":
            c.gate(str(rng.choice(ONE_QUBIT_ROTATIONS)), [name], [q[0]])
        elif kind == "2q":
            c.gate(str(rng.choice(TWO_QUBIT_ROTATIONS)), [name], [q[0], q[1]])
        elif kind == "crot":
            c.controlled([q[0]], "Ry", [name], [q[1]])
        elif kind == "shared":
            c.gate("Rxyz", [name, Param(name, 0.5), 0.2], [q[0]])
        else:
            c.channel("depolarizing", Param(name, 0.1), [q[0]])
        if rng.uniform() < 0.5:
            c.controlled([q[2]], "X", [], [q[3]])
    c.gate("H", [], [0])
    c.channel("amplitude_damping", 0.2, [1 % n])
    c.parameters = {name: float(rng.uniform(0.3, 1.2)) for name in names}
    return c


def random_observable(n, rng, terms=None):
    """Random coefficients on ``terms`` distinct non-identity Pauli strings (all of them by default).

    Sparse observables often make some circuit gradients vanish identically,
    and a zero gradient cannot be checked to a relative tolerance against
    finite differences, whose round-off floor sits near 1e-12.
    """
    from blochsim.bloch import PauliObservable, pauli_word

    terms = 4**n - 1 if terms is None else terms
    idx = rng.choice(np.arange(1, 4**n), terms, replace=False)
    return PauliObservable([(float(rng.normal()), pauli_word(int(i), n)) for i in idx], n)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "acceptance_lines", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
