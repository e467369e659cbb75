"""A first tour: states as Bloch vectors, gates, a controlled gate and noise.

Run with ``python3 demos/quickstart.py``.
"""

import numpy as np

from blochsim import (
    GateSpec,
    PauliObservable,
    apply_channel,
    apply_controlled,
    apply_gate,
    cnot,
    density_from_bloch,
    depolarizing,
    expectation,
    purity,
    zero_state,
)

# |00> has Bloch entries r_II = r_IZ = r_ZI = r_ZZ = 1.
r = zero_state(2)
print("nonzero entries of |00>:", np.flatnonzero(r))

# Hadamard on qubit 0 and CNOT(0 -> 1) give a Bell state.
r = apply_gate(r, GateSpec("H", (), (0,)))
r = apply_controlled(r, cnot(0, 1))
bell = PauliObservable([(1.0, "XX"), (-1.0, "YY"), (1.0, "ZZ")])
print("<XX> - <YY> + <ZZ> =", expectation(r, bell))

# Depolarizing noise on one qubit mixes the state.
noisy = apply_channel(r, depolarizing(0.2), [1])
print(f"purity {purity(r):.3f} -> {purity(noisy):.3f}")
print("density matrix after noise:\n", np.round(density_from_bloch(noisy).real, 3))
