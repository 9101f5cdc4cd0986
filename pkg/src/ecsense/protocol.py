"""Error-corrected phase sensing on a two-qubit code.

The sensing qubit (first tensor factor) couples to the signal; the robust
qubit (second factor) is a flag that lets a single emission be undone. The
codewords

  |0_L> = (|0> + e^{i phi}|1>)/sqrt(2) (x) |0>
  |1_L> = (|0> - e^{i phi}|1>)/sqrt(2) (x) |1>

are eigenstates of the signal generator g*(cos phi X + sin phi Y) on the
sensing qubit with eigenvalues +g and -g, so a logical superposition is a
Ramsey clock. Damping acts on the sensing qubit only. Two protection modes
keep the state on the code space between corrections:

  pulsed_echo       a bit flip on the sensing qubit at every half cycle;
                    exact for phi = 0
  continuous_drive  a weak compensating drive matched to the damping rate;
                    exact for every phi

Sign convention: propagators are exp(-i H t). With that convention the
acceptance targets for the accumulated Ramsey phase require the logical-zero
branch to carry exp(+i g t), so the signal enters every cycle generator with
an internal sign flip (SIGNAL_SIGN). The public `signal_hamiltonian` keeps
the plain +g eigenvalue relation stated above.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import _kernel
from .hilbert import (
    IDENTITY_2,
    PROJ_GROUND,
    SIGMA_MINUS,
    SIGMA_X,
    SIGMA_Y,
    Operator,
    StateVector,
    apply,
    embed,
    normalize,
    propagator,
    tensor_product,
)
from .noise import DampingModel, JumpEvent, effective_hamiltonian, trajectory_streams

SIGNAL_SIGN = -1.0
COMPENSATION_SIGN = +1.0

#: number of equal-width in-cycle time cells a jump can land in; placement
#: weights each cell by the emission rate the state actually has there
JUMP_TIME_CELLS = 64

#: trajectories per reduction block; fixed so ensemble averages are summed in
#: the same order no matter how many threads run
BLOCK = 64

MODES = ("pulsed_echo", "continuous_drive")

_CODE_DIMS = (2, 2)


@dataclass(frozen=True)
class CodeWords:
    """The two logical basis states for a given encoding angle."""

    phi: float
    zero: StateVector = field(init=False)
    one: StateVector = field(init=False)

    def __post_init__(self):
        e = np.exp(1j * self.phi) / np.sqrt(2.0)
        r = 1.0 / np.sqrt(2.0)
        object.__setattr__(
            self, "zero", StateVector(_CODE_DIMS, np.array([r, 0, e, 0]))
        )
        object.__setattr__(
            self, "one", StateVector(_CODE_DIMS, np.array([0, r, 0, -e]))
        )


def encode(c0: complex, c1: complex, code: CodeWords) -> StateVector:
    """Logical state c0|0_L> + c1|1_L> for normalized coefficients."""
    weight = abs(c0) ** 2 + abs(c1) ** 2
    if abs(weight - 1.0) > 1e-10:
        raise ValueError(f"|c0|^2 + |c1|^2 = {weight:.12g}, expected 1")
    amps = c0 * code.zero.amps + c1 * code.one.amps
    return normalize(StateVector(_CODE_DIMS, amps))


def signal_hamiltonian(g: float, phi: float = 0.0) -> Operator:
    """g * (cos(phi) X + sin(phi) Y) on the sensing qubit, identity on the
    robust qubit. CodeWords(phi).zero/.one are its +g/-g eigenstates."""
    v = math.cos(phi) * SIGMA_X.entries + math.sin(phi) * SIGMA_Y.entries
    return Operator.hermitian(np.kron(g * v, np.eye(2)))


def compensation_hamiltonian_single(gamma: float, alpha: float, beta: float) -> Operator:
    """Drive that freezes the single-qubit state alpha|0> + beta|1> (real
    amplitudes) under damping at rate gamma: the conditional no-jump flow
    then only shrinks the norm, by exp(-gamma beta^2 t)."""
    if abs(complex(alpha).imag) > 1e-12 or abs(complex(beta).imag) > 1e-12:
        raise ValueError("compensation drive is defined for real amplitudes")
    return Operator.hermitian(
        COMPENSATION_SIGN * gamma * float(alpha) * float(beta) * SIGMA_Y.entries
    )


def compensation_hamiltonian_encoded(gamma: float, phi: float = 0.0) -> Operator:
    """Two-qubit compensation drive under which both codewords are exact
    eigenvectors of the conditional cycle generator.

    The sensing-qubit factor is the phi-rotated Y; the robust qubit supplies
    the sign that distinguishes the two codewords.
    """
    w = -math.sin(phi) * SIGMA_X.entries + math.cos(phi) * SIGMA_Y.entries
    sz = np.array([[1.0, 0.0], [0.0, -1.0]])
    return Operator.hermitian(COMPENSATION_SIGN * 0.5 * gamma * np.kron(w, sz))


def pi_pulse_schedule(dt: float) -> list[tuple[float, Operator]]:
    """Echo pulses within one cycle: (time offset, unitary) pairs."""
    x = tensor_product(SIGMA_X, IDENTITY_2)
    return [(0.5 * dt, x), (dt, x)]


def recovery_unitary(code: CodeWords) -> Operator:
    """Unitary completing |00> -> |0_L>, |01> -> -|1_L>.

    After a detected emission the state lies in span{|00>, |01>} with the
    logical content carried as (c0|00> - c1|01>), so this map restores
    c0|0_L> + c1|1_L> exactly. The remaining two columns are any
    orthonormal completion.
    """
    m = np.zeros((4, 4), dtype=np.complex128)
    m[:, 0] = code.zero.amps
    m[:, 1] = -code.one.amps
    for col, basis_index in ((2, 2), (3, 3)):
        v = np.zeros(4, dtype=np.complex128)
        v[basis_index] = 1.0
        for prev in range(col):
            v -= np.vdot(m[:, prev], v) * m[:, prev]
        m[:, col] = v / np.linalg.norm(v)
    return Operator.unitary(m)


def reset_sensing_qubit(psi: StateVector) -> StateVector:
    """Project the sensing qubit onto |0> and renormalize."""
    proj = embed(PROJ_GROUND, psi.dims, 0)
    return normalize(apply(proj, psi))


@dataclass(frozen=True)
class ProtocolParams:
    """Run configuration for a sensing protocol.

    t_final must be an integer number of cycles; both stability products
    2*gamma*dt and g*dt must stay at or below 0.2.
    """

    gamma: float = 1.0
    g: float = 0.3
    phi: float = 0.0
    dt: float = 1e-3
    t_final: float = 2.0
    eta: float = 1.0
    mode: str = "continuous_drive"
    n_traj: int = 1000
    master_seed: int = 42
    apply_corrections: bool = True

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if self.dt <= 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.t_final <= 0:
            raise ValueError(f"t_final must be > 0, got {self.t_final}")
        if 2.0 * self.gamma * self.dt > 0.2 + 1e-12:
            raise ValueError(
                f"2*gamma*dt = {2.0 * self.gamma * self.dt:.4g} exceeds 0.2; "
                "reduce gamma or dt"
            )
        if abs(self.g) * self.dt > 0.2 + 1e-12:
            raise ValueError(
                f"g*dt = {abs(self.g) * self.dt:.4g} exceeds 0.2; reduce g or dt"
            )
        n = round(self.t_final / self.dt)
        if n < 1 or abs(n * self.dt - self.t_final) > 1e-9 * max(self.t_final, self.dt):
            raise ValueError(
                f"t_final={self.t_final} is not an integer multiple of dt={self.dt}"
            )
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1], got {self.eta}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.n_traj < 1:
            raise ValueError(f"n_traj must be >= 1, got {self.n_traj}")
        if self.master_seed < 0:
            raise ValueError(f"master_seed must be >= 0, got {self.master_seed}")

    @property
    def n_cycles(self) -> int:
        return round(self.t_final / self.dt)

    @property
    def code(self) -> CodeWords:
        return CodeWords(self.phi)


def coherent_cycle_hamiltonian(params: ProtocolParams) -> Operator:
    """Hermitian part of the cycle generator (signal with the internal sign
    flip, plus the compensation drive in continuous_drive mode)."""
    h = SIGNAL_SIGN * signal_hamiltonian(params.g, params.phi).entries
    if params.mode == "continuous_drive":
        h = h + compensation_hamiltonian_encoded(params.gamma, params.phi).entries
    return Operator.hermitian(h)


def cycle_segments(params: ProtocolParams) -> list[tuple]:
    """One cycle as an ordered list of ("evolve", duration, Operator) and
    ("pulse", Operator) pieces. The Operator in an evolve piece is the
    coherent Hamiltonian; damping is added by the consumer."""
    h = coherent_cycle_hamiltonian(params)
    if params.mode == "pulsed_echo":
        x = tensor_product(SIGMA_X, IDENTITY_2)
        half = 0.5 * params.dt
        return [("evolve", half, h), ("pulse", x), ("evolve", half, h), ("pulse", x)]
    return [("evolve", params.dt, h)]


def cycle_propagator(params: ProtocolParams) -> Operator:
    """Full-cycle conditional (no-jump) propagator, pulses included."""
    model = DampingModel(params.gamma, target=0)
    u = np.eye(4, dtype=np.complex128)
    for seg in cycle_segments(params):
        if seg[0] == "evolve":
            _, dur, h = seg
            u = propagator(effective_hamiltonian(h, model), dur).entries @ u
        else:
            u = seg[1].entries @ u
    return Operator(u)


@dataclass(frozen=True)
class CycleOperators:
    """Precomposed dense matrices for the stepping kernel."""

    u_cycle: np.ndarray
    a_ops: np.ndarray
    b_ops: np.ndarray
    jump_op: np.ndarray
    corr_ops: np.ndarray
    code0: np.ndarray
    code1: np.ndarray
    cells: int


def cycle_operators(params: ProtocolParams, cells: int = JUMP_TIME_CELLS) -> CycleOperators:
    """Build the kernel inputs.

    For each in-cycle time cell midpoint s: the split pair A(s) (start -> s)
    and B(s) (s -> end) of the conditional evolution, and the end-of-cycle
    correction for a jump detected at s. An emission leaves the sensing
    qubit in its ground state; each later echo pulse flips it, so at the
    boundary the error lives in the ground or excited sensing subspace
    according to the parity of the pulses that followed. The correction
    projects onto that subspace and re-encodes it onto the code space;
    conditioning on the parity is legitimate because the classical detection
    record carries the emission time.
    """
    model = DampingModel(params.gamma, target=0)
    segs = cycle_segments(params)
    dt = params.dt
    code = params.code

    def heff(h: Operator) -> Operator:
        return effective_hamiltonian(h, model)

    def seg_matrix(seg, dur=None) -> np.ndarray:
        if seg[0] == "evolve":
            d = seg[1] if dur is None else dur
            return propagator(heff(seg[2]), d).entries
        return seg[1].entries

    u_cycle = np.eye(4, dtype=np.complex128)
    for seg in segs:
        u_cycle = seg_matrix(seg) @ u_cycle

    # Re-encoding maps for the two parities. sigma_minus sends both codewords
    # to the ground sensing subspace with a common phase and a sign split
    # (|0_L> -> |00>, |1_L> -> -|01>, both over sqrt 2); an odd number of
    # pulses afterwards moves that content to the excited subspace and
    # absorbs the sign (|0_L> -> |10>, |1_L> -> +|11>).
    e = np.eye(4, dtype=np.complex128)
    corr_even = np.outer(code.zero.amps, e[0]) - np.outer(code.one.amps, e[1])
    corr_odd = np.outer(code.zero.amps, e[2]) + np.outer(code.one.amps, e[3])

    a_ops = np.empty((cells, 4, 4), dtype=np.complex128)
    b_ops = np.empty((cells, 4, 4), dtype=np.complex128)
    corr_ops = np.empty((cells, 4, 4), dtype=np.complex128)
    for j in range(cells):
        s = (j + 0.5) * dt / cells
        a = np.eye(4, dtype=np.complex128)
        b = np.eye(4, dtype=np.complex128)
        cursor = 0.0
        split_done = False
        pulses_after = 0
        for seg in segs:
            if seg[0] == "pulse":
                if split_done:
                    b = seg_matrix(seg) @ b
                    pulses_after += 1
                else:
                    a = seg_matrix(seg) @ a
                continue
            dur = seg[1]
            if split_done:
                b = seg_matrix(seg) @ b
            elif cursor + dur <= s:
                a = seg_matrix(seg) @ a
            else:
                a = seg_matrix(seg, dur=s - cursor) @ a
                b = seg_matrix(seg, dur=cursor + dur - s) @ b
                split_done = True
            cursor += dur
        a_ops[j] = a
        b_ops[j] = b
        corr_ops[j] = corr_odd if pulses_after % 2 else corr_even

    return CycleOperators(
        u_cycle=u_cycle,
        a_ops=a_ops,
        b_ops=b_ops,
        jump_op=embed(SIGMA_MINUS, _CODE_DIMS, 0).entries.copy(),
        corr_ops=corr_ops,
        code0=code.zero.amps.copy(),
        code1=code.one.amps.copy(),
        cells=cells,
    )


def ideal_state(params: ProtocolParams, t: float) -> StateVector:
    """Noise-free target at time t from the logical plus start:
    (e^{+i g t}|0_L> + e^{-i g t}|1_L>)/sqrt(2)."""
    code = params.code
    c0 = np.exp(1j * params.g * t) / np.sqrt(2.0)
    c1 = np.exp(-1j * params.g * t) / np.sqrt(2.0)
    return StateVector(_CODE_DIMS, c0 * code.zero.amps + c1 * code.one.amps)


@dataclass(frozen=True)
class TrajectoryRecord:
    """One unfolded trajectory: boundary snapshots plus the event list."""

    index: int
    times: np.ndarray
    states: list[StateVector]
    events: list[JumpEvent]
    n_jumps: int
    n_detected: int


def _draw_cycle_uniforms(params: ProtocolParams, index: int, point: int, n: int):
    jump_gen, event_gen = trajectory_streams(params.master_seed, index, point)
    return jump_gen.random(n), event_gen.random((n, 2))


def run_trajectory(
    params: ProtocolParams,
    index: int = 0,
    *,
    point: int = 0,
    snapshot_cycles: Sequence[int] | None = None,
    ops: CycleOperators | None = None,
) -> TrajectoryRecord:
    """Simulate one trajectory, recording the normalized state at the given
    1-based cycle boundaries (all of them by default)."""
    if ops is None:
        ops = cycle_operators(params)
    n = params.n_cycles
    if snapshot_cycles is None:
        snaps = np.arange(1, n + 1, dtype=np.int64)
    else:
        snaps = np.asarray(snapshot_cycles, dtype=np.int64)
        if snaps.size and (
            snaps[0] < 1 or snaps[-1] > n or np.any(np.diff(snaps) <= 0)
        ):
            raise ValueError("snapshot_cycles must be increasing in [1, n_cycles]")

    psi = encode(1 / np.sqrt(2), 1 / np.sqrt(2), params.code).amps.copy()
    jump_u, event_u = _draw_cycle_uniforms(params, index, point, n)

    out_ab = np.empty((0, 2), dtype=np.complex128)
    out_counts = np.empty((0, 2), dtype=np.int64)
    out_states = np.empty((snaps.size, 4), dtype=np.complex128)
    out_events = np.empty((n, 4), dtype=np.float64)

    ne, jumps, detected, err = _kernel.run_span(
        psi, ops.u_cycle, ops.a_ops, ops.b_ops, ops.jump_op, ops.corr_ops,
        params.eta, params.apply_corrections, jump_u, event_u,
        np.empty(0, dtype=np.int64), ops.code0, ops.code1, out_ab, out_counts,
        snaps, out_states, out_events, 0, 0,
    )
    if err:
        raise RuntimeError("jump hit a state with no excited amplitude")

    events = []
    for row in out_events[:ne]:
        k, cell, det, corr = row
        t = (k + (cell + 0.5) / ops.cells) * params.dt
        events.append(JumpEvent(time=t, detected=bool(det), corrected=bool(corr)))

    states = [StateVector(_CODE_DIMS, out_states[i]) for i in range(snaps.size)]
    return TrajectoryRecord(
        index=index,
        times=snaps.astype(np.float64) * params.dt,
        states=states,
        events=events,
        n_jumps=int(jumps),
        n_detected=int(detected),
    )


@dataclass(frozen=True)
class EnsembleResult:
    """Trajectory-averaged observables on a snapshot grid.

    mean_coherence is the ensemble average of <0_L|psi><psi|1_L>; the Ramsey
    signal is mean_x_logical = 2 Re and the dephasing envelope is 2 abs of
    it. Fidelity is measured against the noise-free phase-evolved target.
    per_traj_ab, when kept, holds the raw (<0_L|psi>, <1_L|psi>) pairs.
    """

    params: ProtocolParams
    times: np.ndarray
    cycles: np.ndarray
    mean_coherence: np.ndarray
    mean_fidelity: np.ndarray
    mean_jumps: np.ndarray
    mean_detected: np.ndarray
    n_traj: int
    per_traj_ab: np.ndarray | None = None
    state_times: np.ndarray | None = None
    states: np.ndarray | None = None

    @property
    def mean_x_logical(self) -> np.ndarray:
        return 2.0 * self.mean_coherence.real

    @property
    def envelope(self) -> np.ndarray:
        return 2.0 * np.abs(self.mean_coherence)


def _resolve_threads(threads: int | None) -> int:
    if threads is None or threads < 1:
        return 1
    return threads


def run_ensemble(
    params: ProtocolParams,
    snapshot_cycles: Sequence[int] | None = None,
    *,
    point: int = 0,
    state_cycles: Sequence[int] | None = None,
    keep_per_trajectory: bool = False,
    threads: int | None = 1,
) -> EnsembleResult:
    """Average params.n_traj trajectories on a common snapshot grid.

    Trajectory index i always uses the same derived random streams, and
    partial sums are accumulated in fixed blocks of BLOCK trajectories that
    are reduced in block order, so the result is identical for any thread
    count. state_cycles optionally records full state vectors (one block of
    cycles per trajectory; sized n_traj x len(state_cycles) x 4).
    """
    n = params.n_cycles
    if snapshot_cycles is None:
        snaps = np.arange(1, n + 1, dtype=np.int64)
    else:
        snaps = np.asarray(snapshot_cycles, dtype=np.int64)
    if snaps.size == 0:
        raise ValueError("need at least one snapshot cycle")
    if snaps[0] < 1 or snaps[-1] > n or np.any(np.diff(snaps) <= 0):
        raise ValueError("snapshot_cycles must be increasing in [1, n_cycles]")
    scyc = (
        np.empty(0, dtype=np.int64)
        if state_cycles is None
        else np.asarray(state_cycles, dtype=np.int64)
    )
    if scyc.size and (scyc[0] < 1 or scyc[-1] > n or np.any(np.diff(scyc) <= 0)):
        raise ValueError("state_cycles must be increasing in [1, n_cycles]")

    ops = cycle_operators(params)
    nt = snaps.size
    ntraj = params.n_traj
    times = snaps.astype(np.float64) * params.dt
    e0 = np.exp(-1j * params.g * times)  # conj of the ideal branch phases
    e1 = np.exp(+1j * params.g * times)
    psi0 = encode(1 / np.sqrt(2), 1 / np.sqrt(2), params.code).amps

    ab_store = (
        np.empty((ntraj, nt, 2), dtype=np.complex128) if keep_per_trajectory else None
    )
    state_store = (
        np.empty((ntraj, scyc.size, 4), dtype=np.complex128) if scyc.size else None
    )

    n_blocks = (ntraj + BLOCK - 1) // BLOCK
    no_events = np.empty((0, 4), dtype=np.float64)

    def run_block(b: int):
        lo = b * BLOCK
        hi = min(lo + BLOCK, ntraj)
        csum = np.zeros(nt, dtype=np.complex128)
        fsum = np.zeros(nt, dtype=np.float64)
        jsum = np.zeros(nt, dtype=np.float64)
        dsum = np.zeros(nt, dtype=np.float64)
        out_ab = np.empty((nt, 2), dtype=np.complex128)
        out_counts = np.empty((nt, 2), dtype=np.int64)
        out_states = np.empty((scyc.size, 4), dtype=np.complex128)
        for i in range(lo, hi):
            psi = psi0.copy()
            jump_u, event_u = _draw_cycle_uniforms(params, i, point, n)
            _, _, _, err = _kernel.run_span(
                psi, ops.u_cycle, ops.a_ops, ops.b_ops, ops.jump_op,
                ops.corr_ops, params.eta, params.apply_corrections, jump_u,
                event_u, snaps, ops.code0, ops.code1, out_ab, out_counts,
                scyc, out_states, no_events, 0, 0,
            )
            if err:
                raise RuntimeError(
                    f"trajectory {i}: jump hit a state with no excited amplitude"
                )
            csum += out_ab[:, 0] * np.conj(out_ab[:, 1])
            fsum += 0.5 * np.abs(e0 * out_ab[:, 0] + e1 * out_ab[:, 1]) ** 2
            jsum += out_counts[:, 0]
            dsum += out_counts[:, 1]
            if ab_store is not None:
                ab_store[i] = out_ab
            if state_store is not None:
                state_store[i] = out_states
        return csum, fsum, jsum, dsum

    nworkers = _resolve_threads(threads)
    if nworkers == 1 or n_blocks == 1:
        partials = [run_block(b) for b in range(n_blocks)]
    else:
        with ThreadPoolExecutor(max_workers=nworkers) as pool:
            partials = list(pool.map(run_block, range(n_blocks)))

    csum = np.zeros(nt, dtype=np.complex128)
    fsum = np.zeros(nt, dtype=np.float64)
    jsum = np.zeros(nt, dtype=np.float64)
    dsum = np.zeros(nt, dtype=np.float64)
    for c, f, j, d in partials:  # block order: deterministic reduction
        csum += c
        fsum += f
        jsum += j
        dsum += d

    return EnsembleResult(
        params=params,
        times=times,
        cycles=snaps,
        mean_coherence=csum / ntraj,
        mean_fidelity=fsum / ntraj,
        mean_jumps=jsum / ntraj,
        mean_detected=dsum / ntraj,
        n_traj=ntraj,
        per_traj_ab=ab_store,
        state_times=scyc.astype(np.float64) * params.dt if scyc.size else None,
        states=state_store,
    )


def with_params(params: ProtocolParams, **changes) -> ProtocolParams:
    """Validated copy with fields replaced."""
    return replace(params, **changes)
