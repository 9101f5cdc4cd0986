import math

import numpy as np
import pytest

from ecsense.hilbert import Operator, SIGMA_X, StateVector, basis_state, normalize
from ecsense.noise import DampingModel, effective_hamiltonian, step_no_jump
from ecsense.oracle import (
    DensityMatrix,
    LindbladModel,
    analytic_damping,
    average_states,
    damping_model,
    evolve_cycles,
    lindblad_evolve,
    protocol_model,
    trace_distance,
    trajectory_average,
)
from ecsense.protocol import ProtocolParams, encode, run_trajectory


def test_density_matrix_validation():
    with pytest.raises(ValueError):
        DensityMatrix(np.diag([0.7, 0.7]))  # trace 1.4
    with pytest.raises(ValueError):
        DensityMatrix(np.array([[1.0, 0.5], [0.0, 0.0]]))  # not Hermitian
    with pytest.raises(ValueError):
        DensityMatrix(np.diag([1.5, -0.5]))  # negative eigenvalue


def test_density_matrix_from_state_and_purity():
    rho = DensityMatrix.from_state(normalize(StateVector((2,), np.array([1.0, 1.0]))))
    assert rho.purity() == pytest.approx(1.0, abs=1e-12)
    assert rho.entries[0, 1] == pytest.approx(0.5)


def test_lindblad_excited_population_decay():
    rho = DensityMatrix.from_state(basis_state((2,), (1,)))
    model = damping_model(1.0, dt=0.01)
    out = evolve_cycles(rho, model, 50, substeps=8)
    assert abs(out.entries[1, 1].real - math.exp(-2 * 0.5)) < 1e-7


def test_lindblad_coherence_decay():
    plus = normalize(StateVector((2,), np.array([1.0, 1.0])))
    rho = DensityMatrix.from_state(plus)
    model = damping_model(1.0, dt=0.01)
    out = evolve_cycles(rho, model, 50, substeps=8)
    assert abs(abs(out.entries[0, 1]) - 0.5 * math.exp(-0.5)) < 1e-7


def test_lindblad_unitary_limit_keeps_purity():
    rho = DensityMatrix.from_state(basis_state((2,), (0,)))
    model = damping_model(0.0, h=Operator.hermitian(0.3 * SIGMA_X.entries), dt=0.05)
    out = evolve_cycles(rho, model, 40, substeps=8)
    assert abs(out.purity() - 1.0) < 1e-8
    assert abs(complex(np.trace(out.entries)) - 1.0) < 1e-9


def test_lindblad_rejects_coarse_substeps():
    rho = DensityMatrix.from_state(basis_state((2,), (1,)))
    # rate * step = 2*gamma*dt = 0.2 > 0.05 with a single substep
    model = damping_model(1.0, dt=0.1)
    with pytest.raises(ValueError):
        lindblad_evolve(rho, model, 0.1, substeps=1)


def test_lindblad_model_schedule_validation():
    with pytest.raises(ValueError):
        LindbladModel(schedule=(), jump_ops=())
    with pytest.raises(ValueError):
        LindbladModel(schedule=(("evolve", -0.1, Operator(np.zeros((2, 2)))),),
                      jump_ops=())


def test_analytic_damping_examples():
    _, weight = analytic_damping(1.0, 0.0, 1.0, 2.0)
    assert weight == 0.0

    branch, weight = analytic_damping(0.0, 1.0, 1.0, math.log(2.0))
    assert np.allclose(branch.amps, [0.0, 0.5], atol=1e-14)
    assert weight == pytest.approx(0.75, abs=1e-14)


def test_analytic_damping_matches_composed_stepping():
    # 100 exact substeps reproduce the closed form to 1e-10
    gamma, t, n = 0.8, 0.5, 100
    h_eff = effective_hamiltonian(Operator(np.zeros((2, 2))), DampingModel(gamma))
    psi = StateVector((2,), np.array([0.6, 0.8]))
    cum = 0.0
    for _ in range(n):
        psi, p = step_no_jump(psi, h_eff, t / n)
        cum += p
    branch, weight = analytic_damping(0.6, 0.8, gamma, t)
    assert np.abs(psi.amps - branch.amps).max() < 1e-10
    assert abs(cum - weight) < 1e-10


def test_trajectory_average_pure_and_mixed():
    pp = ProtocolParams(gamma=0.0, g=0.3, dt=0.01, t_final=0.02, n_traj=2)
    recs = [run_trajectory(pp, i) for i in range(2)]
    rho = trajectory_average(recs, 0.02)
    assert rho.purity() == pytest.approx(1.0, abs=1e-10)  # identical states

    with pytest.raises(ValueError):
        trajectory_average(recs, 0.015)  # between snapshots


def test_average_states_equal_count_mixture():
    a = np.array([1.0, 0.0], dtype=np.complex128)
    b = np.array([0.0, 1.0], dtype=np.complex128)
    rho = average_states(np.array([a, b]))
    assert np.allclose(rho.entries, 0.5 * np.eye(2), atol=1e-15)


def test_trajectory_average_agrees_with_average_states():
    pp = ProtocolParams(gamma=1.0, g=0.3, dt=1e-3, t_final=0.5, eta=0.5,
                        n_traj=40, master_seed=31)
    recs = [run_trajectory(pp, i, snapshot_cycles=[500]) for i in range(40)]
    stacked = np.array([r.states[-1].amps for r in recs])
    d = trace_distance(trajectory_average(recs, 0.5), average_states(stacked))
    assert d < 1e-12


def test_trace_distance_properties():
    rho = DensityMatrix(np.diag([1.0, 0.0]))
    sig = DensityMatrix(np.diag([0.0, 1.0]))
    assert trace_distance(rho, rho) == pytest.approx(0.0, abs=1e-15)
    assert trace_distance(rho, sig) == pytest.approx(1.0, abs=1e-12)
    assert trace_distance(rho, sig) == trace_distance(sig, rho)


def test_unfolding_matches_lindblad_single_config():
    # quick single-configuration version of the full-matrix acceptance run
    pp = ProtocolParams(gamma=1.0, g=0.3, phi=0.0, dt=1e-3, t_final=1.0,
                        n_traj=3000, master_seed=33, apply_corrections=False)
    from ecsense.protocol import run_ensemble

    cyc = np.array([400, 700, 1000], dtype=np.int64)
    res = run_ensemble(pp, [pp.n_cycles], state_cycles=cyc, threads=4)
    model = protocol_model(pp)
    rho = DensityMatrix.from_state(encode(2 ** -0.5, 2 ** -0.5, pp.code))
    prev = 0
    for i, c in enumerate(cyc):
        rho = evolve_cycles(rho, model, int(c) - prev, substeps=2)
        prev = int(c)
        d = trace_distance(average_states(res.states[:, i, :]), rho)
        assert d < 0.035, f"trace distance {d:.4f} at cycle {c}"
