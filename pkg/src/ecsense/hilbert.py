"""Dense complex linear algebra on small tensor-product Hilbert spaces.

States are complex128 amplitude vectors tagged with their subsystem
dimensions; operators are dense square matrices. Both are frozen after
construction (the underlying numpy buffers are marked read-only) so values
can be shared across threads without copying.

Index convention: the basis index is the mixed-radix digit string of the
subsystem labels with the first listed subsystem most significant. For two
qubits the index of |s0 s1> is 2*s0 + s1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

MAX_DIM = 16

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10


def _frozen(values, dtype=np.complex128) -> np.ndarray:
    out = np.array(values, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class StateVector:
    """Pure state on a tensor product of finite subsystems.

    The amplitudes are not required to be normalized: no-jump evolution
    shrinks the norm on purpose and the lost weight is meaningful.
    """

    dims: tuple[int, ...]
    amps: np.ndarray

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims or any(d < 2 for d in dims):
            raise ValueError(f"invalid subsystem dimensions {dims!r}")
        amps = _frozen(self.amps)
        if amps.ndim != 1 or amps.size != int(np.prod(dims)):
            raise ValueError(
                f"amplitude vector of length {amps.size} does not match dims {dims!r}"
            )
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "amps", amps)

    @property
    def dim(self) -> int:
        return self.amps.size

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))


@dataclass(frozen=True, eq=False)
class Operator:
    """Dense linear operator. Use the tagged constructors when a stronger
    guarantee is part of the contract."""

    entries: np.ndarray
    dim: int = field(init=False)

    def __post_init__(self):
        entries = _frozen(self.entries)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ValueError(f"operator entries must be square, got {entries.shape}")
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "dim", entries.shape[0])

    @classmethod
    def hermitian(cls, entries) -> "Operator":
        op = cls(entries)
        dev = np.abs(op.entries - op.entries.conj().T).max()
        if dev > HERMITIAN_TOL:
            raise ValueError(f"matrix is not Hermitian (deviation {dev:.3e})")
        return op

    @classmethod
    def unitary(cls, entries) -> "Operator":
        op = cls(entries)
        dev = np.abs(op.entries @ op.entries.conj().T - np.eye(op.dim)).max()
        if dev > UNITARY_TOL:
            raise ValueError(f"matrix is not unitary (deviation {dev:.3e})")
        return op


def tensor_product(a, b):
    """Kronecker product of two states or two operators.

    The first factor is the most significant index digit, matching the
    basis convention above.
    """
    if isinstance(a, StateVector) and isinstance(b, StateVector):
        return StateVector(a.dims + b.dims, np.kron(a.amps, b.amps))
    if isinstance(a, Operator) and isinstance(b, Operator):
        return Operator(np.kron(a.entries, b.entries))
    raise ValueError("tensor_product needs two StateVectors or two Operators")


def apply(op: Operator, psi: StateVector) -> StateVector:
    if op.dim != psi.dim:
        raise ValueError(f"operator dim {op.dim} does not match state dim {psi.dim}")
    return StateVector(psi.dims, op.entries @ psi.amps)


def inner(a: StateVector, b: StateVector) -> complex:
    """<a|b>, conjugating the first argument."""
    if a.dim != b.dim:
        raise ValueError("states live on different spaces")
    return complex(np.vdot(a.amps, b.amps))


def normalize(psi: StateVector) -> StateVector:
    n = psi.norm()
    if n < 1e-150:
        raise RuntimeError("cannot normalize a zero state")
    return StateVector(psi.dims, psi.amps / n)


def propagator(h_eff: Operator, dt: float) -> Operator:
    """expm(-i * dt * h_eff).

    h_eff may carry an anti-Hermitian part -i*Gamma with Gamma positive
    semidefinite, in which case the result contracts norms. dt must be
    nonnegative and the dimension small enough for dense expm to be exact
    to working precision.
    """
    if dt < 0:
        raise ValueError(f"negative time step {dt}")
    if h_eff.dim > MAX_DIM:
        raise ValueError(f"dimension {h_eff.dim} exceeds supported maximum {MAX_DIM}")
    return Operator(expm(-1j * dt * h_eff.entries))


def basis_state(dims, indices) -> StateVector:
    dims = tuple(int(d) for d in dims)
    indices = tuple(int(i) for i in indices)
    if len(indices) != len(dims):
        raise ValueError("one index per subsystem required")
    flat = 0
    for d, i in zip(dims, indices):
        if not 0 <= i < d:
            raise ValueError(f"index {i} out of range for dimension {d}")
        flat = flat * d + i
    amps = np.zeros(int(np.prod(dims)), dtype=np.complex128)
    amps[flat] = 1.0
    return StateVector(dims, amps)


def embed(op: Operator, dims, k: int) -> Operator:
    """Embed a single-subsystem operator at position k of a composite space."""
    dims = tuple(int(d) for d in dims)
    if not 0 <= k < len(dims):
        raise ValueError(f"subsystem index {k} out of range")
    if op.dim != dims[k]:
        raise ValueError(f"operator dim {op.dim} does not match subsystem dim {dims[k]}")
    left = int(np.prod(dims[:k])) if k > 0 else 1
    right = int(np.prod(dims[k + 1:])) if k + 1 < len(dims) else 1
    out = np.kron(np.kron(np.eye(left), op.entries), np.eye(right))
    return Operator(out)


# Single-qubit constants. Index 0 is the ground state, index 1 the excited
# state; SIGMA_MINUS lowers |1> to |0>.
IDENTITY_2 = Operator(np.eye(2))
SIGMA_X = Operator.hermitian([[0.0, 1.0], [1.0, 0.0]])
SIGMA_Y = Operator.hermitian([[0.0, -1.0j], [1.0j, 0.0]])
SIGMA_Z = Operator.hermitian([[1.0, 0.0], [0.0, -1.0]])
SIGMA_MINUS = Operator([[0.0, 1.0], [0.0, 0.0]])
SIGMA_PLUS = Operator([[0.0, 0.0], [1.0, 0.0]])
PROJ_GROUND = Operator.hermitian([[1.0, 0.0], [0.0, 0.0]])
PROJ_EXCITED = Operator.hermitian([[0.0, 0.0], [0.0, 1.0]])
