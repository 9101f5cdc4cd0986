"""Jump unfolding of amplitude damping on one qubit.

The conditional no-jump branch shrinks the excited amplitude and the norm
loss is exactly the jump weight; averaging jump and no-jump branches over
many trajectories reproduces the master-equation populations.
"""

import math

import numpy as np

from ecsense.hilbert import Operator, StateVector
from ecsense.noise import (
    DampingModel,
    apply_jump,
    effective_hamiltonian,
    step_no_jump,
    trajectory_streams,
)
from ecsense.oracle import DensityMatrix, damping_model, lindblad_evolve

gamma = 1.0
dt = 0.01
n_steps = 100
alpha, beta = 0.6, 0.8

model = DampingModel(gamma)
h_eff = effective_hamiltonian(Operator(np.zeros((2, 2))), model)

# conditional branch: closed form e^{-gamma t} on the excited amplitude
psi = StateVector((2,), np.array([alpha, beta], dtype=np.complex128))
total_p = 0.0
for _ in range(n_steps):
    psi, p = step_no_jump(psi, h_eff, dt)
    total_p += p
t = n_steps * dt
print(f"no-jump branch after t={t}:")
print(f"  excited amplitude {psi.amps[1].real:.6f}  closed form {beta * math.exp(-gamma * t):.6f}")
print(f"  accumulated jump weight {total_p:.6f}  closed form {beta**2 * (1 - math.exp(-2 * gamma * t)):.6f}")

# unfolded ensemble vs master equation, on the excited population
n_traj = 2000
pops = np.zeros(n_steps)
for i in range(n_traj):
    jump_stream, _ = trajectory_streams(42, i)
    u = jump_stream.random(n_steps)
    phi = StateVector((2,), np.array([alpha, beta], dtype=np.complex128))
    for k in range(n_steps):
        nxt, p = step_no_jump(phi, h_eff, dt)
        if u[k] < p:
            phi = apply_jump(phi, model)
        else:
            phi = nxt
        a = phi.amps / np.linalg.norm(phi.amps)
        phi = StateVector((2,), a)
        pops[k] += abs(a[1]) ** 2
pops /= n_traj

rho = DensityMatrix.from_state(StateVector((2,), np.array([alpha, beta], dtype=np.complex128)))
exact = np.empty(n_steps)
lm = damping_model(gamma, dt=dt)
for k in range(n_steps):
    rho = lindblad_evolve(rho, lm, dt, substeps=4)
    exact[k] = rho.entries[1, 1].real

worst = np.max(np.abs(pops - exact))
print(f"ensemble vs master equation, excited population ({n_traj} trajectories):")
for k in (9, 49, 99):
    print(f"  t={dt * (k + 1):.2f}  ensemble {pops[k]:.4f}  exact {exact[k]:.4f}")
print(f"  worst deviation {worst:.4f} (expect ~1/sqrt(n) = {1 / math.sqrt(n_traj):.3f})")
