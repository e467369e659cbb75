"""Variational thermalizer on the 4-site Heisenberg chain at a few temperatures.

A full sweep (8 betas, 10 seeds) takes several minutes; this script runs
one seed per beta.
"""

from blochsim import vqt

H = vqt.heisenberg_1d(4, J=-1.0, g=0.3, h=0.2)
for beta in (0.0, 1.0, 5.0, 20.0):
    m = vqt.run_vqt(H, beta, seed=0, iters=500)
    print(f"beta={beta:5.1f}  loss={m.final_loss: .4f}  "
          f"-log Z={-vqt.thermal_target(H, beta).log_partition: .4f}  "
          f"fidelity={m.fidelity:.4f}  trace distance={m.trace_distance:.4f}")
