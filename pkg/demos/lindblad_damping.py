"""Amplitude damping with a driving field, and the adjoint gradient of the decay rate."""

import numpy as np

from blochsim import PauliObservable
from blochsim.lindblad import JumpOperator, build_generator, evolve, expectation_gradients

lower = np.array([[0, 1], [0, 0]])  # |0><1|
H = PauliObservable([(0.4, "X")])
gen = build_generator(H, [JumpOperator(lower, (0,), "gamma")], params={"gamma": 0.8})

r0 = np.array([1.0, 0.0, 0.0, -1.0])  # |1>
traj = evolve(r0, gen, 3.0, method="expm", times=np.linspace(0, 3, 7))
for t, r in zip(traj.times, traj.states):
    print(f"t={t:.1f}  <X>={r[1]: .4f}  <Y>={r[2]: .4f}  <Z>={r[3]: .4f}")

z = np.array([0.0, 0.0, 0.0, 1.0])
out = expectation_gradients(gen, r0, z, 3.0, dt=1e-3)
print(f"<Z>(3) = {out['cost']:.6f},  d<Z>/dgamma = {out['params']['gamma']:.6f}")
