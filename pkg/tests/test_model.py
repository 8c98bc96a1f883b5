import math

import numpy as np
import pytest

from qgrow.errors import (
    AliasingError,
    LayoutError,
    NonIntegerFrequencyError,
    ShapeError,
    SpectrumError,
)
from qgrow.model import (
    BlockSpec,
    GateSpec,
    InitSpec,
    Role,
    accessible_spectrum,
    ansatz_block,
    build_reuploader,
    feature_map_block,
    forward,
    fourier_coefficients,
    model_from_json,
    model_to_json,
    predict,
    reuploader_layout,
)

from conftest import dense_forward, random_model

TEACHER_INIT = InitSpec("uniform", (0.0, math.pi / 5), (0.0, math.pi / 5))


def single_qubit(n_layers, psi=1.0, paired=False):
    """RY ansatz and RX encoding, one gate each, theta = 0."""
    layout = reuploader_layout(
        n_layers, ansatz_block(1, paired=paired), feature_map_block(1, paired=paired)
    )
    m = build_reuploader(1, layout, InitSpec("identity"))
    return m.with_params(psi=np.full(m.params.psi.size, psi))


@pytest.fixture
def teacher_2q():
    layout = reuploader_layout(5, ansatz_block(2), feature_map_block(2))
    return build_reuploader(2, layout, TEACHER_INIT, seed=7)


class TestBuild:
    def test_identity_pairs_sum_to_zero(self):
        m = build_reuploader(
            2, reuploader_layout(3, ansatz_block(2), feature_map_block(2)), seed=3
        )
        theta, psi = m.params.theta, m.params.psi
        np.testing.assert_array_equal(theta[0::2], -theta[1::2])
        np.testing.assert_array_equal(psi[0::2], -psi[1::2])
        assert np.all((theta[0::2] >= 0) & (theta[0::2] <= 0.1))
        assert np.all((psi[0::2] >= 0) & (psi[0::2] <= math.pi / 9))

    def test_one_slot_per_rotation(self, teacher_2q):
        # 6 ansatz blocks x 2 qubits x pair, 5 feature maps x 2 qubits x pair
        assert teacher_2q.params.theta.size == 24
        assert teacher_2q.params.psi.size == 20
        assert teacher_2q.layout_signature() == "U" + "FU" * 5

    def test_deterministic(self):
        layout = reuploader_layout(4, ansatz_block(2), feature_map_block(2))
        a = build_reuploader(2, layout, TEACHER_INIT, seed=11)
        b = build_reuploader(2, layout, TEACHER_INIT, seed=11)
        c = build_reuploader(2, layout, TEACHER_INIT, seed=12)
        assert a.params.theta.tobytes() == b.params.theta.tobytes()
        assert a.params.psi.tobytes() == b.params.psi.tobytes()
        assert a.params.theta.tobytes() != c.params.theta.tobytes()

    def test_fm_dim_out_of_range(self):
        fm = feature_map_block(2, dims=[0, 3])
        with pytest.raises(LayoutError):
            build_reuploader(2, [ansatz_block(2), fm], input_dim=2)

    def test_must_start_with_ansatz(self):
        with pytest.raises(LayoutError):
            build_reuploader(1, [feature_map_block(1), ansatz_block(1)])

    def test_empty_layout(self):
        with pytest.raises(LayoutError):
            build_reuploader(1, [])

    def test_dangling_pair(self):
        bad = BlockSpec(Role.ANSATZ, (GateSpec("RY", 0, pairs_previous=True),))
        with pytest.raises(LayoutError):
            build_reuploader(1, [bad])

    def test_parameters_read_only(self, teacher_2q):
        with pytest.raises(ValueError):
            teacher_2q.params.theta[0] = 1.0


class TestForward:
    def test_cos_example(self):
        m = single_qubit(1)
        assert forward(m, [0.4]) == pytest.approx(math.cos(0.4), abs=1e-14)
        assert forward(m, [0.4]) == pytest.approx(0.921061, abs=1e-6)

    def test_identity_constant(self):
        layout = reuploader_layout(1, ansatz_block(1), feature_map_block(1))
        m = build_reuploader(1, layout, seed=0)
        xs = np.linspace(-5, 5, 17)
        np.testing.assert_allclose(predict(m, xs), 1.0, atol=1e-12)

    def test_teacher_matches_dense_oracle(self, teacher_2q):
        # Frozen values come from conftest.dense_forward.
        assert forward(teacher_2q, [0.0, 0.0]) == pytest.approx(-0.8082330068123578, abs=1e-12)
        assert forward(teacher_2q, [1.0, 2.0]) == pytest.approx(0.17950020110511072, abs=1e-12)

    def test_random_models_match_dense_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(25):
            m = random_model(rng, max_qubits=3)
            for _ in range(3):
                x = rng.uniform(-3, 3, m.input_dim)
                got = forward(m, x)
                assert got == pytest.approx(dense_forward(m, x), abs=1e-12)
                assert -1 <= got <= 1

    def test_predict_matches_forward(self, teacher_2q):
        X = np.random.default_rng(0).uniform(0, 6, (10, 2))
        batch = predict(teacher_2q, X)
        np.testing.assert_allclose(batch, [forward(teacher_2q, x) for x in X], atol=1e-15)

    def test_shape_error(self, teacher_2q):
        with pytest.raises(ShapeError):
            forward(teacher_2q, [1.0])
        with pytest.raises(ShapeError):
            predict(teacher_2q, np.zeros((4, 3)))


class TestSpectrum:
    def test_single_repetition(self):
        np.testing.assert_allclose(accessible_spectrum(single_qubit(1)).frequencies, [-1, 0, 1])

    def test_three_repetitions(self):
        omega = accessible_spectrum(single_qubit(3))
        np.testing.assert_allclose(omega.frequencies, np.arange(-3, 4))
        assert omega.K == 7
        assert str(omega) == "Ω = {-3..3}, K = 7"

    def test_two_qubits_shared_dim(self):
        layout = reuploader_layout(
            1, ansatz_block(2, paired=False), feature_map_block(2, dims=[0, 0], paired=False)
        )
        m = build_reuploader(2, layout).with_params(psi=[1.0, 1.0])
        np.testing.assert_allclose(accessible_spectrum(m).frequencies, [-2, -1, 0, 1, 2])

    @pytest.mark.parametrize("L", range(1, 7))
    def test_linear_in_depth(self, L):
        assert accessible_spectrum(single_qubit(L)).K == 2 * L + 1

    def test_per_dimension_sets(self, teacher_2q):
        omegas = accessible_spectrum(teacher_2q)
        assert len(omegas) == 2
        for om in omegas:
            np.testing.assert_allclose(om.frequencies, -om.frequencies[::-1], atol=1e-12)

    def test_no_feature_maps(self):
        m = build_reuploader(1, [ansatz_block(1)])
        with pytest.raises(SpectrumError):
            accessible_spectrum(m)


class TestFourier:
    def test_cos(self):
        c = fourier_coefficients(single_qubit(1), grid_points=16)
        assert abs(c[1] - 0.5) < 1e-10 and abs(c[-1] - 0.5) < 1e-10
        assert abs(c[0]) < 1e-10

    def test_identity_model(self):
        m = build_reuploader(1, reuploader_layout(2, ansatz_block(1), feature_map_block(1)))
        m = m.with_params(psi=[1.0, -1.0, 2.0, -2.0])
        c = fourier_coefficients(m, grid_points=32)
        assert abs(c.pop(0) - 1) < 1e-12
        assert max(abs(v) for v in c.values()) < 1e-12

    def test_aliasing(self):
        with pytest.raises(AliasingError):
            fourier_coefficients(single_qubit(1), grid_points=2)

    def test_non_integer(self):
        with pytest.raises(NonIntegerFrequencyError):
            fourier_coefficients(single_qubit(1, psi=0.5))

    def test_truncation_property(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            m = random_model(rng, max_qubits=2, max_blocks=11, integer_psi=True, init_mode="uniform")
            for d in range(m.input_dim):
                omega = accessible_spectrum(m, d).frequencies.round().astype(int)
                c = fourier_coefficients(m, d, grid_points=64, fixed=rng.uniform(0, 6, m.input_dim))
                energy = sum(abs(v) ** 2 for v in c.values())
                outside = sum(abs(v) ** 2 for k, v in c.items() if k not in set(omega))
                assert outside < 1e-9 * max(energy, 1e-300)


class TestSerialisation:
    def test_json_round_trip(self, teacher_2q):
        back = model_from_json(model_to_json(teacher_2q))
        assert back == teacher_2q
        np.testing.assert_array_equal(back.params.theta, teacher_2q.params.theta)
        np.testing.assert_array_equal(back.params.psi, teacher_2q.params.psi)
        assert back.blocks == teacher_2q.blocks
        assert forward(back, [1.0, 2.0]) == forward(teacher_2q, [1.0, 2.0])
