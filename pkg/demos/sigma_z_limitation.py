# the echo sequence only protects signals the code is built for: a sigma_z
# signal commutes with the pulses into cancellation, a sigma_x signal of the
# same strength accumulates its full phase 2gT

import numpy as np

from ecsense.estimate import sigma_z_failure_demo
from ecsense.protocol import ProtocolParams, run_ensemble

g, dt, t_final = 0.3, 0.01, 1.0

phase_z = sigma_z_failure_demo(g, 0.0, dt, t_final)
print(f"sigma_z signal through echo cycles: phase {phase_z:.3e} "
      f"(bound 2*g*dt = {2 * g * dt:.0e})")

times, phases = sigma_z_failure_demo(g, 0.0, dt, t_final, return_series=True)
print(f"largest mid-run excursion {np.max(np.abs(phases)):.3e} over {len(times)} cycles")

pp = ProtocolParams(gamma=0.0, g=g, phi=0.0, dt=dt, t_final=t_final,
                    mode="pulsed_echo", n_traj=1, master_seed=1)
res = run_ensemble(pp, [pp.n_cycles])
phase_x = float(np.angle(res.mean_coherence[-1]))
print(f"sigma_x signal, same strength, same pulses: phase {phase_x:.6f} "
      f"(= 2gT = {2 * g * t_final})")
