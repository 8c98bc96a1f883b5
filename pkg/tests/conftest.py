"""Independent oracles shared by the test modules.

Nothing here goes through the strided kernels in :mod:`qgrow.simulator`:
circuits are rebuilt as explicit ``2**n x 2**n`` matrices.
"""
import math

import numpy as np
import pytest

from qgrow.verify import random_model  # noqa: F401 - re-exported for the tests

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)


def rot(pauli, angle):
    return math.cos(angle / 2) * I2 - 1j * math.sin(angle / 2) * pauli


def embed(op, qubit, n):
    # Qubit 0 is the least-significant bit, i.e. the right-most Kronecker factor.
    mats = [op if q == qubit else I2 for q in reversed(range(n))]
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def dense_cnot(control, target, n):
    dim = 2**n
    m = np.zeros((dim, dim), dtype=complex)
    for i in range(dim):
        j = i ^ (1 << target) if (i >> control) & 1 else i
        m[j, i] = 1
    return m


def dense_gate(kind, n, qubit, angle=None, control=None):
    if kind == "CNOT":
        return dense_cnot(control, qubit, n)
    return embed(rot(X if kind == "RX" else Y, angle), qubit, n)


def dense_forward(model, x):
    """<Z_measured> via full matrix products."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = model.n_qubits
    state = np.zeros(2**n, dtype=complex)
    state[0] = 1
    theta, psi = model.params.theta, model.params.psi
    for block in model.blocks:
        for g in block.gates:
            if g.kind.value == "CNOT":
                m = dense_cnot(g.control, g.qubit, n)
            elif g.input_dim is not None:
                m = dense_gate(g.kind.value, n, g.qubit, psi[g.slot] * x[g.input_dim])
            else:
                m = dense_gate(g.kind.value, n, g.qubit, theta[g.slot])
            state = m @ state
    obs = embed(Z, model.measured_qubit, n)
    return float(np.real(np.vdot(state, obs @ state)))


def central_difference(f, x0, h):
    x0 = np.asarray(x0, dtype=float)
    out = np.zeros(x0.size)
    for i in range(x0.size):
        e = np.zeros(x0.size)
        e[i] = h
        out[i] = (f(x0 + e) - f(x0 - e)) / (2 * h)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
