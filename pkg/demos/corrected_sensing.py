"""Error-corrected phase accumulation versus the uncorrected baseline.

Every detected emission is undone by reset + re-encoding, so the logical
superposition keeps turning at 2g while the physical qubit decays at rate
gamma. With corrections off the fringe collapses within ~1/gamma.
"""

import argparse

import numpy as np

from ecsense.protocol import ProtocolParams, run_ensemble, with_params

parser = argparse.ArgumentParser(description=__doc__)
parser.add_argument("--trajectories", type=int, default=1000)
parser.add_argument("--seed", type=int, default=42)
args = parser.parse_args()

pp = ProtocolParams(gamma=1.0, g=0.3, phi=0.0, dt=1e-3, t_final=2.0,
                    eta=1.0, n_traj=args.trajectories, master_seed=args.seed)
snaps = [500, 1000, 1500, 2000]

corrected = run_ensemble(pp, snaps, threads=4)
bare = run_ensemble(with_params(pp, apply_corrections=False), snaps, threads=4)

print(f"gamma={pp.gamma} g={pp.g} dt={pp.dt} n={pp.n_traj}")
print("time   corrected: fidelity  phase/2gt  envelope   uncorrected envelope")
for i, t in enumerate(corrected.times):
    phase = np.angle(corrected.mean_coherence[i])
    print(f"{t:4.1f}   {corrected.mean_fidelity[i]:.6f}  {phase / (2 * pp.g * t):9.6f} "
          f" {corrected.envelope[i]:.4f}     {bare.envelope[i]:.4f}")

jumps = corrected.mean_jumps[-1]
print(f"mean jumps per trajectory {jumps:.2f}, all detected and corrected")
print(f"fringe ratio corrected/uncorrected at t=1: "
      f"{corrected.envelope[1] / bare.envelope[1]:.1f}")
print("the uncorrected envelope partially rebounds after t~1/gamma, but with")
print(f"inverted sign (mean coherence {bare.mean_coherence[-1].real:+.3f} at "
      f"t=2): the phase record is already scrambled")
