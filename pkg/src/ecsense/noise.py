"""Amplitude damping, its no-jump/jump unfolding, and classical detection.

Rate convention (single source of truth, imported by every other module):
a damping rate gamma decays the excited-state *amplitude* as exp(-gamma*t)
and therefore the excited population as exp(-2*gamma*t). Equivalently the
Lindblad jump operator is L = sqrt(2*gamma) * sigma_minus and the no-jump
generator subtracts i*gamma*P_excited from the coherent Hamiltonian.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hilbert import (
    Operator,
    PROJ_EXCITED,
    SIGMA_MINUS,
    StateVector,
    apply,
    embed,
    normalize,
    propagator,
)

#: Excited-population decay rate in units of gamma. Downstream code must use
#: this constant (via jump_operator / effective_hamiltonian) instead of
#: re-deriving the factor of two.
POPULATION_RATE_FACTOR = 2.0


@dataclass(frozen=True)
class DampingModel:
    """Amplitude damping of one qubit inside a register of qubits."""

    gamma: float
    target: int = 0

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError(f"damping rate must be nonnegative, got {self.gamma}")
        if self.target < 0:
            raise ValueError(f"target qubit index must be nonnegative, got {self.target}")


@dataclass(frozen=True)
class DetectionModel:
    """Classical detection of emitted quanta with efficiency eta."""

    eta: float
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"detection efficiency must lie in [0, 1], got {self.eta}")


@dataclass(frozen=True)
class JumpEvent:
    time: float
    detected: bool
    corrected: bool

    def __post_init__(self):
        if self.corrected and not self.detected:
            raise ValueError("an undetected jump cannot have been corrected")


def _qubit_dims(dim: int, target: int) -> tuple[int, ...]:
    n = int(dim).bit_length() - 1
    if 2 ** n != dim:
        raise ValueError(f"dimension {dim} is not a power of two; damping targets qubits")
    if target >= n:
        raise ValueError(f"target qubit {target} out of range for {n} qubits")
    return (2,) * n


def excited_projector(model: DampingModel, dim: int) -> Operator:
    """Projector onto the excited state of the damped qubit, embedded."""
    dims = _qubit_dims(dim, model.target)
    return embed(PROJ_EXCITED, dims, model.target)


def jump_operator(model: DampingModel, dim: int) -> Operator:
    """Lindblad operator L = sqrt(2*gamma) * sigma_minus on the target qubit."""
    dims = _qubit_dims(dim, model.target)
    lower = embed(SIGMA_MINUS, dims, model.target)
    return Operator(np.sqrt(POPULATION_RATE_FACTOR * model.gamma) * lower.entries)


def effective_hamiltonian(h_coherent: Operator, model: DampingModel) -> Operator:
    """h_coherent - i*gamma*P_excited on the damped qubit.

    This is the generator of no-jump evolution under expm(-i*dt*h_eff); it
    equals h - (i/2) L^dag L for the jump operator above.
    """
    p = excited_projector(model, h_coherent.dim)
    return Operator(h_coherent.entries - 1j * model.gamma * p.entries)


def step_no_jump(psi: StateVector, h_eff: Operator, dt: float) -> tuple[StateVector, float]:
    """One exact no-jump step.

    Returns the evolved, intentionally unnormalized state together with the
    jump probability for the step, i.e. the norm-squared lost to the jump
    channel. The probability is exact for the whole step, not a first-order
    approximation, because the propagator is exact.
    """
    evolved = apply(propagator(h_eff, dt), psi)
    before = float(np.vdot(psi.amps, psi.amps).real)
    after = float(np.vdot(evolved.amps, evolved.amps).real)
    p_jump = min(max(before - after, 0.0), 1.0)
    return evolved, p_jump


def apply_jump(psi: StateVector, model: DampingModel) -> StateVector:
    """Collapse after an emission: sigma_minus on the target, renormalized.

    Raises if the state has no excited amplitude on the target qubit, since
    a jump cannot have occurred there.
    """
    dims = _qubit_dims(psi.dim, model.target)
    lowered = apply(embed(SIGMA_MINUS, dims, model.target), psi)
    if lowered.norm() < 1e-150:
        raise RuntimeError("jump applied to a state with no excited amplitude")
    return normalize(lowered)


def sample_detection(event_occurred: bool, det: DetectionModel, stream: np.random.Generator) -> bool:
    """Bernoulli(eta) detection draw, consumed only when an event occurred."""
    if not event_occurred:
        return False
    return bool(stream.random() < det.eta)


def trajectory_seed(master_seed: int, index: int, point: int = 0) -> np.random.SeedSequence:
    """Root seed for one trajectory, derived from (master_seed, point, index).

    The derivation is splittable and order-independent: any trajectory's
    stream can be reconstructed without generating the others, which is what
    makes parallel ensembles byte-reproducible.
    """
    if index < 0 or point < 0:
        raise ValueError("trajectory and point indices must be nonnegative")
    return np.random.SeedSequence(entropy=int(master_seed), spawn_key=(point, index))


def trajectory_streams(
    master_seed: int, index: int, point: int = 0
) -> tuple[np.random.Generator, np.random.Generator]:
    """Two independent generators for one trajectory.

    The first drives the per-cycle jump decision, the second the per-cycle
    event pair (jump-time fraction, detection). Block draws from these
    streams concatenate identically to single draws, so consumers may
    pre-draw uniforms in batches of any size.
    """
    children = trajectory_seed(master_seed, index, point).spawn(2)
    return np.random.default_rng(children[0]), np.random.default_rng(children[1])
