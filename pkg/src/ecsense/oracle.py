"""Independent ground truth for the trajectory simulation.

Deterministic density-matrix integration of the same cycle schedule the
trajectory runner uses, plus the closed-form single-qubit damping solution.
The trajectory ensemble, averaged without conditioning, must reproduce this
evolution; that comparison is the main correctness gate for the stochastic
code, so nothing here may share numerical machinery with the kernel. The
integrator is a plain fixed-step fourth-order Runge-Kutta written out
explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hilbert import Operator, StateVector
from .noise import POPULATION_RATE_FACTOR, DampingModel, jump_operator
from .protocol import ProtocolParams, TrajectoryRecord, cycle_segments

TRACE_TOL = 1e-9
HERM_TOL = 1e-10
EIG_TOL = -1e-8


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Validated mixed state: unit trace, Hermitian, positive within
    floating-point slack."""

    entries: np.ndarray

    def __post_init__(self):
        entries = np.array(self.entries, dtype=np.complex128)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ValueError(f"density matrix must be square, got {entries.shape}")
        tr = complex(np.trace(entries))
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValueError(f"trace deviates from 1 by {abs(tr - 1.0):.3e}")
        herm = np.abs(entries - entries.conj().T).max()
        if herm > HERM_TOL:
            raise ValueError(f"matrix is not Hermitian (deviation {herm:.3e})")
        lo = float(np.linalg.eigvalsh(entries).min())
        if lo < EIG_TOL:
            raise ValueError(f"negative eigenvalue {lo:.3e}")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def from_state(cls, psi: StateVector) -> "DensityMatrix":
        n2 = float(np.vdot(psi.amps, psi.amps).real)
        return cls(np.outer(psi.amps, psi.amps.conj()) / n2)

    def purity(self) -> float:
        return float(np.trace(self.entries @ self.entries).real)


@dataclass(frozen=True)
class LindbladModel:
    """One cycle of open evolution: a piecewise-constant Hamiltonian schedule
    (with instantaneous pulse unitaries) plus jump operators.

    schedule entries are ("evolve", duration, Operator) or
    ("pulse", Operator), in time order, exactly as cycle_segments produces.
    """

    schedule: tuple
    jump_ops: tuple

    def __post_init__(self):
        object.__setattr__(self, "schedule", tuple(self.schedule))
        object.__setattr__(self, "jump_ops", tuple(self.jump_ops))
        dims = set()
        total = 0.0
        for seg in self.schedule:
            if seg[0] == "evolve":
                if seg[1] < 0:
                    raise ValueError("negative segment duration")
                total += seg[1]
                dims.add(seg[2].dim)
            elif seg[0] == "pulse":
                dims.add(seg[1].dim)
            else:
                raise ValueError(f"unknown schedule entry {seg[0]!r}")
        for op in self.jump_ops:
            dims.add(op.dim)
        if len(dims) > 1:
            raise ValueError(f"inconsistent operator dimensions {sorted(dims)}")
        if total <= 0:
            raise ValueError("schedule must cover a positive duration")
        object.__setattr__(self, "cycle_time", total)

    @property
    def dim(self) -> int:
        for seg in self.schedule:
            return seg[2].dim if seg[0] == "evolve" else seg[1].dim
        raise ValueError("empty schedule")


def damping_model(gamma: float, h: Operator | None = None, dim: int = 2,
                  dt: float = 1.0) -> LindbladModel:
    """Single-segment model: constant Hamiltonian (zero by default) with
    damping on qubit 0, covering one interval of length dt."""
    if h is None:
        h = Operator(np.zeros((dim, dim)))
    return LindbladModel(
        schedule=(("evolve", dt, h),),
        jump_ops=(jump_operator(DampingModel(gamma, target=0), h.dim),),
    )


def protocol_model(params: ProtocolParams) -> LindbladModel:
    """The unconditional channel matching one protocol cycle: identical
    Hamiltonian schedule (signal, compensation, pulses) and the same jump
    operator the trajectory unfolding uses."""
    return LindbladModel(
        schedule=tuple(cycle_segments(params)),
        jump_ops=(jump_operator(DampingModel(params.gamma, target=0), 4),),
    )


def _rhs(rho: np.ndarray, h: np.ndarray, ls: list) -> np.ndarray:
    out = -1j * (h @ rho - rho @ h)
    for l, ldl in ls:
        out += l @ rho @ l.conj().T - 0.5 * (ldl @ rho + rho @ ldl)
    return out


def lindblad_evolve(rho: DensityMatrix, model: LindbladModel, dt: float,
                    substeps: int = 16) -> DensityMatrix:
    """Integrate one cycle of duration dt.

    dt must match the model's schedule coverage. substeps is the RK4 step
    budget for the whole cycle, apportioned to evolve segments by duration;
    pulses are applied exactly. Trace drift beyond 1e-9 per call raises
    instead of being silently renormalized away.
    """
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    if abs(model.cycle_time - dt) > 1e-9 * max(dt, 1.0):
        raise ValueError(
            f"schedule covers {model.cycle_time}, not the requested {dt}"
        )
    ls = []
    rate = 0.0
    for op in model.jump_ops:
        l = op.entries
        ldl = l.conj().T @ l
        ls.append((l, ldl))
        rate += float(np.linalg.norm(ldl, 2))

    r = np.array(rho.entries, dtype=np.complex128)
    for seg in model.schedule:
        if seg[0] == "pulse":
            u = seg[1].entries
            r = u @ r @ u.conj().T
            continue
        dur, h = seg[1], seg[2].entries
        if dur == 0.0:
            continue
        n = max(1, round(substeps * dur / model.cycle_time))
        step = dur / n
        if rate * step > 0.05:
            raise ValueError(
                f"substep {step:.3g} too coarse for jump rate {rate:.3g}; "
                "increase substeps"
            )
        for _ in range(n):
            k1 = _rhs(r, h, ls)
            k2 = _rhs(r + 0.5 * step * k1, h, ls)
            k3 = _rhs(r + 0.5 * step * k2, h, ls)
            k4 = _rhs(r + step * k3, h, ls)
            r = r + (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    drift = abs(complex(np.trace(r)) - 1.0)
    if drift > TRACE_TOL:
        raise RuntimeError(
            f"trace drifted by {drift:.3e} in one cycle; increase substeps"
        )
    r /= complex(np.trace(r)).real
    return DensityMatrix(r)


def evolve_cycles(rho: DensityMatrix, model: LindbladModel, n_cycles: int,
                  substeps: int = 16) -> DensityMatrix:
    """Repeat lindblad_evolve over n_cycles identical cycles."""
    if n_cycles < 0:
        raise ValueError("n_cycles must be >= 0")
    for _ in range(n_cycles):
        rho = lindblad_evolve(rho, model, model.cycle_time, substeps)
    return rho


def analytic_damping(alpha: complex, beta: complex, gamma: float,
                     t: float) -> tuple[StateVector, float]:
    """Closed-form no-jump branch for one damped qubit.

    From alpha|0> + beta|1>, conditioned on no emission up to t, the
    unnormalized amplitudes are (alpha, beta*e^{-gamma t}); the weight lost
    to the jump branch is |beta|^2 (1 - e^{-2 gamma t}).
    """
    if abs(abs(alpha) ** 2 + abs(beta) ** 2 - 1.0) > 1e-9:
        raise ValueError("input amplitudes must be normalized")
    if gamma < 0 or t < 0:
        raise ValueError("gamma and t must be nonnegative")
    decay = np.exp(-gamma * t)
    branch = StateVector((2,), np.array([alpha, beta * decay]))
    weight = abs(beta) ** 2 * (1.0 - decay ** (POPULATION_RATE_FACTOR))
    return branch, float(weight)


def trajectory_average(records: list[TrajectoryRecord], time: float) -> DensityMatrix:
    """(1/n) sum of |psi_i><psi_i| at the snapshot taken at `time`."""
    if not records:
        raise ValueError("no records to average")
    acc = None
    for rec in records:
        hits = np.nonzero(np.abs(rec.times - time) <= 1e-9 + 1e-9 * abs(time))[0]
        if hits.size == 0:
            raise ValueError(
                f"record {rec.index} has no snapshot at t={time}"
            )
        amps = rec.states[int(hits[0])].amps
        outer = np.outer(amps, amps.conj())
        acc = outer if acc is None else acc + outer
    return DensityMatrix(acc / len(records))


def average_states(states: np.ndarray) -> DensityMatrix:
    """Average (n, d) normalized state rows into a density matrix without
    building record objects; the ensemble runner's state snapshots feed this
    directly."""
    states = np.asarray(states)
    if states.ndim != 2:
        raise ValueError("expected an (n, d) array of states")
    return DensityMatrix(states.T @ states.conj() / states.shape[0])


def trace_distance(a: DensityMatrix, b: DensityMatrix) -> float:
    """(1/2) trace norm of the difference."""
    if a.dim != b.dim:
        raise ValueError("dimension mismatch")
    eigs = np.linalg.eigvalsh(a.entries - b.entries)
    return float(0.5 * np.abs(eigs).sum())
