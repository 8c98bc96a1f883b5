import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qgrow.simulator import (
    GateKind,
    GateOp,
    StateVector,
    apply_gate,
    expectation_pauli_z,
    zero_state,
)

from conftest import dense_gate


class TestZeroState:
    def test_one_qubit(self):
        np.testing.assert_array_equal(zero_state(1).amplitudes, [1, 0])

    def test_two_qubits(self):
        np.testing.assert_array_equal(zero_state(2).amplitudes, [1, 0, 0, 0])

    @pytest.mark.parametrize("n", [0, -1, 21])
    def test_out_of_range(self, n):
        with pytest.raises(ValueError):
            zero_state(n)


class TestApplyGate:
    def test_rx_pi_flips(self):
        s = apply_gate(zero_state(1), GateOp("RX", 0, math.pi))
        np.testing.assert_allclose(s.amplitudes, [0, -1j], atol=1e-15)
        assert expectation_pauli_z(s, 0) == pytest.approx(-1.0, abs=1e-15)

    def test_ry_half_pi(self):
        s = apply_gate(zero_state(1), GateOp("RY", 0, math.pi / 2))
        np.testing.assert_allclose(s.amplitudes, [math.sqrt(2) / 2] * 2, atol=1e-15)

    def test_cnot_truth_table(self):
        # |10> means qubit 1 set, which is basis index 2 under LSB-first order.
        start = StateVector(2, np.eye(4)[0b01])
        out = apply_gate(start, GateOp("CNOT", 1, control=0))
        np.testing.assert_array_equal(out.amplitudes, np.eye(4)[0b11])

    def test_value_semantics(self):
        s = zero_state(2)
        before = s.amplitudes.copy()
        apply_gate(s, GateOp("RY", 1, 0.3))
        np.testing.assert_array_equal(s.amplitudes, before)

    @pytest.mark.parametrize(
        "gate",
        [GateOp("RX", 2, 0.1), GateOp("CNOT", 0, control=3), GateOp("RY", -1, 0.2)],
    )
    def test_bad_index(self, gate):
        with pytest.raises(IndexError):
            apply_gate(zero_state(2), gate)

    def test_cnot_control_equals_target(self):
        with pytest.raises(ValueError):
            GateOp("CNOT", 1, control=1)


class TestExpectation:
    def test_zero_state(self):
        assert expectation_pauli_z(zero_state(1), 0) == 1.0

    def test_equal_superposition(self):
        s = apply_gate(zero_state(1), GateOp("RX", 0, math.pi / 2))
        assert abs(expectation_pauli_z(s, 0)) < 1e-12

    def test_ry_matches_dense_oracle(self):
        psi = dense_gate("RY", 1, 0, 0.7) @ np.array([1, 0], dtype=complex)
        oracle = abs(psi[0]) ** 2 - abs(psi[1]) ** 2
        got = expectation_pauli_z(apply_gate(zero_state(1), GateOp("RY", 0, 0.7)), 0)
        assert got == pytest.approx(oracle, abs=1e-14)
        assert got == pytest.approx(math.cos(0.7), abs=1e-14)
        assert got == pytest.approx(0.764842, abs=1e-6)

    def test_bad_index(self):
        with pytest.raises(IndexError):
            expectation_pauli_z(zero_state(1), 1)


def _random_gate(rng, n):
    kind = ["RX", "RY", "CNOT"][int(rng.integers(3 if n > 1 else 2))]
    t = int(rng.integers(n))
    if kind == "CNOT":
        c = int((t + rng.integers(1, n)) % n)
        return GateOp(kind, t, control=c)
    return GateOp(kind, t, float(rng.uniform(-2 * math.pi, 2 * math.pi)))


class TestInvariants:
    def test_norm_over_long_chains(self):
        rng = np.random.default_rng(0)
        for n in (1, 2, 3, 4):
            s = zero_state(n)
            for _ in range(10_000 // 4):
                s = apply_gate(s, _random_gate(rng, n))
            assert abs(s.norm - 1) < 1e-10

    @given(
        n=st.integers(1, 3),
        kind=st.sampled_from(["RX", "RY"]),
        angle=st.floats(-10, 10),
        seed=st.integers(0, 2**31),
    )
    @settings(max_examples=60, deadline=None)
    def test_rotation_inverse(self, n, kind, angle, seed):
        rng = np.random.default_rng(seed)
        amps = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
        s = StateVector(n, amps / np.linalg.norm(amps))
        q = int(rng.integers(n))
        back = apply_gate(apply_gate(s, GateOp(kind, q, angle)), GateOp(kind, q, -angle))
        np.testing.assert_allclose(back.amplitudes, s.amplitudes, atol=1e-12)
        assert abs(apply_gate(s, GateOp(kind, q, angle)).norm - 1) < 1e-12

    def test_cnot_involution(self):
        rng = np.random.default_rng(1)
        amps = rng.normal(size=8) + 1j * rng.normal(size=8)
        s = StateVector(3, amps / np.linalg.norm(amps))
        g = GateOp("CNOT", 2, control=0)
        np.testing.assert_array_equal(apply_gate(apply_gate(s, g), g).amplitudes, s.amplitudes)

    def test_dense_oracle_agreement(self):
        rng = np.random.default_rng(2)
        for n in (1, 2, 3):
            amps = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
            s = StateVector(n, amps / np.linalg.norm(amps))
            for _ in range(40):
                g = _random_gate(rng, n)
                m = dense_gate(g.kind.value, n, g.target, g.angle, g.control)
                expected = m @ s.amplitudes
                s = apply_gate(s, g)
                np.testing.assert_allclose(s.amplitudes, expected, atol=1e-12)
                assert -1 <= expectation_pauli_z(s, int(rng.integers(n))) <= 1

    def test_gate_kind_coercion(self):
        assert GateOp("RX", 0, 0.1).kind is GateKind.RX
