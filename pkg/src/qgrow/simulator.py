"""Exact statevector simulation for small qubit registers.

Bit order: qubit ``q`` is bit ``q`` of the basis-state index, so qubit 0 is
the least-significant bit and ``|10>`` (qubit 1 set) is index 2.

The kernels below act on arrays whose *last* axis holds the ``2**n``
amplitudes; any leading axes are treated as a batch.  Rotation angles may be
scalars or arrays broadcastable against those leading axes, which is what
lets the training engine push whole datasets through a circuit at once.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

MAX_QUBITS = 20
# Construction accepts the long-chain drift bound; single gates stay ~1e-15.
NORM_TOL = 1e-10


class GateKind(str, Enum):
    RX = "RX"
    RY = "RY"
    CNOT = "CNOT"


@dataclass(frozen=True)
class GateOp:
    """A concrete gate: ``RX``/``RY`` carry an angle, ``CNOT`` a control."""

    kind: GateKind
    target: int
    angle: float | None = None
    control: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", GateKind(self.kind))
        if self.kind is GateKind.CNOT:
            if self.control is None:
                raise ValueError("CNOT needs a control qubit")
            if self.control == self.target:
                raise ValueError("CNOT control and target must differ")
        elif self.angle is None:
            raise ValueError(f"{self.kind.value} needs an angle")


@dataclass(frozen=True)
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        if amps.shape != (2**self.n_qubits,):
            raise ValueError(
                f"expected {2**self.n_qubits} amplitudes, got shape {amps.shape}"
            )
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalised (norm {norm!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def norm(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)


def zero_state(n_qubits: int) -> StateVector:
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise ValueError(f"n_qubits must lie in [1, {MAX_QUBITS}], got {n_qubits}")
    amps = np.zeros(2**n_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(n_qubits, amps)


# -- batched kernels --------------------------------------------------------


def _split(amps: np.ndarray, qubit: int) -> np.ndarray:
    dim = amps.shape[-1]
    low = 1 << qubit
    return amps.reshape(amps.shape[:-1] + (dim // (2 * low), 2, low))


def _angle_factor(values):
    # Per-sample angles need two trailing singleton axes to line up with the
    # (high, low) halves of the split amplitude axis.
    if values.ndim == 0:
        return values
    return values.reshape(values.shape + (1, 1))


def rotate(amps: np.ndarray, kind: GateKind, qubit: int, angle) -> np.ndarray:
    """Apply ``exp(-i * angle * P / 2)`` with ``P`` in {X, Y} on ``qubit``."""
    half = np.asarray(angle, dtype=np.float64) / 2.0
    c = _angle_factor(np.cos(half))
    s = _angle_factor(np.sin(half))
    view = _split(amps, qubit)
    a0 = view[..., 0, :]
    a1 = view[..., 1, :]
    out = np.empty(view.shape, dtype=np.complex128)
    if kind is GateKind.RX:
        out[..., 0, :] = c * a0 - 1j * s * a1
        out[..., 1, :] = c * a1 - 1j * s * a0
    elif kind is GateKind.RY:
        out[..., 0, :] = c * a0 - s * a1
        out[..., 1, :] = s * a0 + c * a1
    else:
        raise ValueError(f"{kind} is not a rotation")
    return out.reshape(amps.shape)


def half_generator(amps: np.ndarray, kind: GateKind, qubit: int) -> np.ndarray:
    """Return ``(-i P / 2) amps``, the angle-derivative factor of a rotation."""
    view = _split(amps, qubit)
    a0 = view[..., 0, :]
    a1 = view[..., 1, :]
    out = np.empty(view.shape, dtype=np.complex128)
    if kind is GateKind.RX:
        out[..., 0, :] = -0.5j * a1
        out[..., 1, :] = -0.5j * a0
    elif kind is GateKind.RY:
        out[..., 0, :] = -0.5 * a1
        out[..., 1, :] = 0.5 * a0
    else:
        raise ValueError(f"{kind} is not a rotation")
    return out.reshape(amps.shape)


def cnot_permutation(n_qubits: int, control: int, target: int) -> np.ndarray:
    idx = np.arange(2**n_qubits)
    flip = (idx >> control) & 1
    return idx ^ (flip << target)


def z_signs(n_qubits: int, qubit: int) -> np.ndarray:
    idx = np.arange(2**n_qubits)
    return 1.0 - 2.0 * ((idx >> qubit) & 1)


# -- single-state API -------------------------------------------------------


def _check_index(qubit: int, n_qubits: int, what: str = "qubit"):
    if not 0 <= qubit < n_qubits:
        raise IndexError(f"{what} index {qubit} out of range for {n_qubits} qubits")


def apply_gate(state: StateVector, gate: GateOp) -> StateVector:
    n = state.n_qubits
    _check_index(gate.target, n, "target")
    if gate.kind is GateKind.CNOT:
        _check_index(gate.control, n, "control")
        perm = cnot_permutation(n, gate.control, gate.target)
        return StateVector(n, state.amplitudes[perm])
    amps = rotate(state.amplitudes, gate.kind, gate.target, gate.angle)
    return StateVector(n, amps)


def expectation_pauli_z(state: StateVector, qubit: int) -> float:
    _check_index(qubit, state.n_qubits)
    probs = np.abs(state.amplitudes) ** 2
    return float(np.dot(z_signs(state.n_qubits, qubit), probs))
