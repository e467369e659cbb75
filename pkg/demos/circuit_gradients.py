"""Reverse-mode gradients of a noisy circuit, checked against finite differences."""

import numpy as np

from blochsim import Circuit, Param, PauliObservable, zero_state
from blochsim.circuit import expectation_and_gradient, expectation_cost, finite_difference_gradients

c = Circuit(3, parameters={"a": 0.3, "b": -0.8, "p": 0.5})
c.gate("Ry", ["a"], [0]).gate("Rzz", ["b"], [0, 1]).gate("Rx", [0.7], [1])
c.controlled([1], "Rx", [Param("a", 2.0)], [2])  # "a" is shared, its gradients add up
c.channel("depolarizing", Param("p", 0.2), [2])  # rate 0.2 * p
c.gate("H", [], [2])

obs = PauliObservable([(1.0, "XIX"), (0.5, "ZZI")])
value, report = expectation_and_gradient(c, zero_state(3), obs)
fd = finite_difference_gradients(expectation_cost(c, zero_state(3), obs), c.parameters)

print(f"cost = {value:.6f}")
for name in c.parameters:
    print(f"  d/d{name}: adjoint {report.params[name]: .10f}   finite difference {fd[name]: .10f}")
print("states cached for the backward pass:", report.cached_states)
