"""Quantum-trajectory simulation of error-corrected phase sensing.

A sensing qubit accumulates phase from a weak signal while undergoing
amplitude damping; every emitted quantum is (imperfectly) detected by a
classical monitor and undone by a recovery operation on a two-qubit code.
The package simulates the conditional dynamics trajectory by trajectory,
checks it against deterministic density-matrix evolution, and turns the
averaged signal into a frequency estimate with error bars.
"""

from .hilbert import (
    Operator,
    StateVector,
    apply,
    basis_state,
    embed,
    inner,
    normalize,
    propagator,
    tensor_product,
)
from .noise import (
    POPULATION_RATE_FACTOR,
    DampingModel,
    DetectionModel,
    JumpEvent,
    apply_jump,
    effective_hamiltonian,
    jump_operator,
    sample_detection,
    step_no_jump,
    trajectory_seed,
    trajectory_streams,
)
from .oracle import (
    DensityMatrix,
    LindbladModel,
    damping_model,
    evolve_cycles,
    lindblad_evolve,
    protocol_model,
    trace_distance,
    trajectory_average,
)
from .estimate import (
    RamseyResult,
    SweepResult,
    crb_std,
    dt_scaling_sweep,
    eta_coherence_sweep,
    logical_x_expectation,
    ramsey_experiment,
    sigma_z_failure_demo,
)
from .protocol import (
    CodeWords,
    EnsembleResult,
    ProtocolParams,
    TrajectoryRecord,
    compensation_hamiltonian_encoded,
    compensation_hamiltonian_single,
    cycle_propagator,
    encode,
    ideal_state,
    pi_pulse_schedule,
    recovery_unitary,
    reset_sensing_qubit,
    run_ensemble,
    run_trajectory,
    signal_hamiltonian,
    with_params,
)

__all__ = [
    "Operator",
    "StateVector",
    "apply",
    "basis_state",
    "embed",
    "inner",
    "normalize",
    "propagator",
    "tensor_product",
    "POPULATION_RATE_FACTOR",
    "DampingModel",
    "DetectionModel",
    "JumpEvent",
    "apply_jump",
    "effective_hamiltonian",
    "jump_operator",
    "sample_detection",
    "step_no_jump",
    "trajectory_seed",
    "trajectory_streams",
    "DensityMatrix",
    "LindbladModel",
    "damping_model",
    "evolve_cycles",
    "lindblad_evolve",
    "protocol_model",
    "trace_distance",
    "trajectory_average",
    "RamseyResult",
    "SweepResult",
    "crb_std",
    "dt_scaling_sweep",
    "eta_coherence_sweep",
    "logical_x_expectation",
    "ramsey_experiment",
    "sigma_z_failure_demo",
    "CodeWords",
    "EnsembleResult",
    "ProtocolParams",
    "TrajectoryRecord",
    "compensation_hamiltonian_encoded",
    "compensation_hamiltonian_single",
    "cycle_propagator",
    "encode",
    "ideal_state",
    "pi_pulse_schedule",
    "recovery_unitary",
    "reset_sensing_qubit",
    "run_ensemble",
    "run_trajectory",
    "signal_hamiltonian",
    "with_params",
]

__version__ = "0.1.0"
