import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, strategies as st

from hamlearn.errors import FrequencyDomainError
from hamlearn.operators import PAULI_I, PAULI_Z
from hamlearn.physics import (
    ControlFlux,
    DeviceParams,
    FrameConfig,
    MeasurementPair,
    QubitConstants,
    build_full_hamiltonian,
    coupling_rate,
    mode_frequency,
    propagator,
    simulate_measurement,
)

from conftest import random_device, random_flux

etas = st.integers(0, 10**9).map(lambda s: random_device(np.random.default_rng(s)))
fluxes = st.integers(0, 10**9).map(lambda s: random_flux(np.random.default_rng(s)))


class TestModeFrequency:
    def test_zero_flux(self):
        assert mode_frequency(20.0, 0.25, 0.0) == pytest.approx(math.sqrt(40.0) - 0.25, abs=1e-12)
        assert mode_frequency(20.0, 0.25, 0.0) == pytest.approx(6.07456, abs=1e-5)

    def test_half_rad_flux(self):
        expected = math.sqrt(8.0 * 20.0 * math.cos(0.25) * 0.25) - 0.25
        assert mode_frequency(20.0, 0.25, 0.5) == pytest.approx(expected, abs=1e-12)
        assert mode_frequency(20.0, 0.25, 0.5) == pytest.approx(5.97547, abs=1e-5)

    def test_ej_scaling_homogeneity(self):
        ej0, ec = 12.0, 0.31
        assert mode_frequency(4 * ej0, ec, 0.0) == pytest.approx(
            math.sqrt(8 * 4 * ej0 * ec) - ec, abs=1e-12
        )

    def test_domain_error_near_pi(self):
        with pytest.raises(FrequencyDomainError):
            mode_frequency(20.0, 0.25, 3.14159)

    @given(st.floats(-1.5, 1.5))
    def test_even_in_flux(self, phi):
        assert mode_frequency(20.0, 0.25, phi) == mode_frequency(20.0, 0.25, -phi)

    def test_invalid_energies(self):
        with pytest.raises(ValueError):
            mode_frequency(-1.0, 0.25, 0.0)


class TestCouplingRate:
    def test_zero_coupling_energy(self):
        assert coupling_rate(20.0, 0.25, 25.5, 0.30, 0.0) == 0.0

    def test_reference_values(self):
        assert coupling_rate(20.0, 0.25, 25.5, 0.30, 0.02) == pytest.approx(0.12842, abs=1e-5)
        assert coupling_rate(20.0, 0.25, 20.0, 0.25, 0.003) == pytest.approx(0.018974, abs=1e-6)

    def test_negative_coupling_rejected(self):
        with pytest.raises(ValueError):
            coupling_rate(20.0, 0.25, 25.5, 0.30, -0.01)


def _z_coefficient(h, mode):
    ops = [PAULI_I] * 3
    ops[mode] = PAULI_Z
    z = np.kron(np.kron(ops[0], ops[1]), ops[2])
    return np.real(np.trace(z @ h)) / 8.0


class TestFullHamiltonian:
    def test_decoupled_on_frame_mode(self, q, frame, decoupled_eta):
        # q1 at maximum flux sits exactly on the frame frequency
        phi = ControlFlux(0.5, 0.2, 0.3)
        h = build_full_hamiltonian(q, decoupled_eta, phi, frame)
        assert np.abs(h - np.diag(np.diag(h))).max() == 0.0
        assert abs(_z_coefficient(h, 0)) < 1e-12
        assert abs(_z_coefficient(h, 1)) > 1e-3

    def test_eigenvalues_match_independent_solver(self, q, frame, midpoint_eta):
        h = build_full_hamiltonian(q, midpoint_eta, ControlFlux(0.25, 0.25, 0.1), frame)
        ours = np.linalg.eigvalsh(h)
        oracle = scipy.linalg.eigh(h, eigvals_only=True)
        assert np.abs(ours - oracle).max() < 1e-10

    def test_swap_covariance(self, frame):
        rng = np.random.default_rng(5)
        swap = np.zeros((8, 8))
        for b in range(8):
            b1, b2, bc = (b >> 2) & 1, (b >> 1) & 1, b & 1
            swap[(b2 << 2) | (b1 << 1) | bc, b] = 1.0
        for _ in range(10):
            eta = random_device(rng)
            phi = random_flux(rng)
            q = QubitConstants(ej0_q1=20.0, ej0_q2=21.0, ec_q1=0.25, ec_q2=0.26)
            q_swapped = QubitConstants(ej0_q1=21.0, ej0_q2=20.0, ec_q1=0.26, ec_q2=0.25)
            eta_swapped = DeviceParams(
                eta.ej0_c1, eta.ec_c1, eta.ec_q2c1, eta.ec_q1c1, eta.ec_q1q2
            )
            phi_swapped = ControlFlux(phi.phi_q2, phi.phi_q1, phi.phi_c1)
            h = build_full_hamiltonian(q, eta, phi, frame)
            h_sw = build_full_hamiltonian(q_swapped, eta_swapped, phi_swapped, frame)
            assert np.abs(h_sw - swap @ h @ swap).max() < 1e-12

    @given(etas, fluxes)
    def test_hermiticity(self, eta, phi):
        h = build_full_hamiltonian(QubitConstants(), eta, phi, FrameConfig())
        assert np.abs(h - h.conj().T).max() < 1e-12


class TestPropagator:
    def test_zero_time_is_identity(self, q, frame, midpoint_eta, mid_flux):
        h = build_full_hamiltonian(q, midpoint_eta, mid_flux, frame)
        assert np.abs(propagator(h, 0.0) - np.eye(8)).max() < 1e-14

    def test_diagonal_hamiltonian(self):
        d = np.array([0.3, -1.2, 0.0, 2.2, 1.0, -0.4, 0.8, -2.0])
        u = propagator(np.diag(d).astype(complex), 1.7)
        assert np.abs(u - np.diag(np.exp(-1j * d * 1.7))).max() < 1e-12

    def test_against_scaling_and_squaring_oracle(self, q, frame, midpoint_eta):
        h = build_full_hamiltonian(q, midpoint_eta, ControlFlux(0.1, 0.3, 1.2), frame)
        oracle = scipy.linalg.expm(-1j * h * 1.0)
        assert np.abs(propagator(h, 1.0) - oracle).max() < 1e-9

    @given(etas, fluxes, st.floats(0.0, 3.0))
    def test_unitarity(self, eta, phi, t):
        h = build_full_hamiltonian(QubitConstants(), eta, phi, FrameConfig())
        u = propagator(h, t)
        assert np.abs(u.conj().T @ u - np.eye(8)).max() < 1e-10

    def test_rejects_non_hermitian(self):
        h = np.zeros((8, 8), dtype=complex)
        h[0, 1] = 1.0
        with pytest.raises(ValueError):
            propagator(h, 1.0)

    def test_rejects_negative_time(self, q, frame, midpoint_eta, mid_flux):
        h = build_full_hamiltonian(q, midpoint_eta, mid_flux, frame)
        with pytest.raises(ValueError):
            propagator(h, -0.5)


class TestSimulateMeasurement:
    def test_zero_time_zz(self, q, frame, midpoint_eta, mid_flux):
        pair = MeasurementPair("Z+", "Z+", "ZZ")
        assert simulate_measurement(q, midpoint_eta, mid_flux, frame, pair, 0.0) == pytest.approx(1.0)

    def test_zero_time_transverse(self, q, frame, midpoint_eta, mid_flux):
        pair = MeasurementPair("X+", "Z+", "ZI")
        assert simulate_measurement(q, midpoint_eta, mid_flux, frame, pair, 0.0) == pytest.approx(0.0, abs=1e-12)

    def test_larmor_precession(self, q, frame, decoupled_eta):
        phi = ControlFlux(0.15, 0.4, 0.2)
        delta = 2.0 * np.pi * (mode_frequency(20.0, 0.25, 0.15) - frame.omega0)
        pair = MeasurementPair("X+", "Z+", "XI")
        for t in (0.0, 0.4, 1.0):
            val = simulate_measurement(q, decoupled_eta, phi, frame, pair, t)
            assert val == pytest.approx(np.cos(delta * t), abs=1e-10)

    @given(etas, fluxes, st.sampled_from(["ZZ", "XI", "YX", "IZ"]), st.floats(0.0, 2.0))
    def test_expectation_bounds(self, eta, phi, obs, t):
        pair = MeasurementPair("X+", "Y-", obs)
        val = simulate_measurement(QubitConstants(), eta, phi, FrameConfig(), pair, t)
        assert -1.0 - 1e-10 <= val <= 1.0 + 1e-10


class TestTypes:
    def test_flux_box_enforced(self):
        with pytest.raises(ValueError):
            ControlFlux(0.6, 0.2, 0.5)
        with pytest.raises(ValueError):
            ControlFlux(0.2, 0.2, 0.05)

    def test_device_params_validation(self):
        with pytest.raises(ValueError):
            DeviceParams(-1.0, 0.3, 0.02, 0.02, 0.003)
        with pytest.raises(ValueError):
            DeviceParams(25.0, 0.3, -0.02, 0.02, 0.003)
        DeviceParams(25.0, 0.3, 0.0, 0.0, 0.0)  # zero couplings are legal

    def test_measurement_pair_validation(self):
        with pytest.raises(ValueError):
            MeasurementPair("Z+", "Z+", "II")
        with pytest.raises(ValueError):
            MeasurementPair("Q+", "Z+", "ZZ")
