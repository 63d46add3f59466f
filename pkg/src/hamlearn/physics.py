"""Flux-tunable three-mode Hamiltonian and synthetic qubit-subspace measurements.

Mode energies are ordinary frequencies in GHz; Hamiltonian matrices are in
angular frequency (rad/ns); evolution times in ns. The composite basis is
``|q1 q2 c1>`` with index ``4*b_q1 + 2*b_q2 + b_c1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import FrequencyDomainError
from .operators import (
    COUPLER_GROUND,
    OBSERVABLE_LABELS,
    STATE_LABELS,
    STATE_VECTORS,
    observable_matrix,
)

TWO_PI = 2.0 * math.pi
GHZ_TO_RADNS = TWO_PI          # GHz (ordinary) -> rad/ns (angular)
MHZ_TO_RADNS = TWO_PI * 1e-3   # MHz (ordinary) -> rad/ns (angular)


def mode_frequency(ej0: float, ec: float, phi: float) -> float:
    """Transmon frequency sqrt(8 E_J E_C) - E_C with E_J = ej0 |cos(phi/2)|, GHz."""
    if ej0 <= 0 or ec <= 0:
        raise ValueError("Josephson and charging energies must be positive")
    ej = ej0 * abs(math.cos(phi / 2.0))
    freq = math.sqrt(8.0 * ej * ec) - ec
    if freq <= 0:
        raise FrequencyDomainError(
            f"mode frequency {freq:.4f} GHz <= 0 at phi={phi:.4f} "
            f"(flux too close to pi for ej0={ej0}, ec={ec})"
        )
    return freq


def coupling_rate(ej_j: float, ec_j: float, ej_k: float, ec_k: float, ec_jk: float) -> float:
    """Capacitive flip-flop rate (ec_jk/sqrt(2)) (E_J^j E_J^k / E_C^j E_C^k)^(1/4), GHz."""
    if min(ej_j, ec_j, ej_k, ec_k) <= 0:
        raise ValueError("mode energies must be positive")
    if ec_jk < 0:
        raise ValueError("coupling energy must be non-negative")
    return ec_jk / math.sqrt(2.0) * (ej_j * ej_k / (ec_j * ec_k)) ** 0.25


DEFAULT_OMEGA0 = mode_frequency(20.0, 0.25, 0.5)


@dataclass(frozen=True)
class QubitConstants:
    """Fixed qubit energies (GHz); defaults are the reference device values."""

    ej0_q1: float = 20.0
    ej0_q2: float = 20.0
    ec_q1: float = 0.25
    ec_q2: float = 0.25

    def __post_init__(self):
        for name in ("ej0_q1", "ej0_q2", "ec_q1", "ec_q2"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")


@dataclass(frozen=True)
class DeviceParams:
    """The five coupler-related energies that vary across the ensemble (GHz).

    The coupler's own energies must be positive; the three capacitive
    coupling energies may be zero (useful for decoupled test devices).
    """

    ej0_c1: float
    ec_c1: float
    ec_q1c1: float
    ec_q2c1: float
    ec_q1q2: float

    def __post_init__(self):
        if self.ej0_c1 <= 0 or self.ec_c1 <= 0:
            raise ValueError("coupler ej0_c1 and ec_c1 must be strictly positive")
        if min(self.ec_q1c1, self.ec_q2c1, self.ec_q1q2) < 0:
            raise ValueError("coupling energies must be non-negative")

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.ej0_c1, self.ec_c1, self.ec_q1c1, self.ec_q2c1, self.ec_q1q2]
        )

    @classmethod
    def from_array(cls, arr) -> "DeviceParams":
        return cls(*(float(v) for v in arr))


PHI_Q_RANGE = (0.0, 0.5)
PHI_C_RANGE = (0.1, 1.35)


@dataclass(frozen=True)
class ControlFlux:
    """Reduced external fluxes (rad), restricted to the control ranges."""

    phi_q1: float
    phi_q2: float
    phi_c1: float

    def __post_init__(self):
        for name, (lo, hi) in (
            ("phi_q1", PHI_Q_RANGE),
            ("phi_q2", PHI_Q_RANGE),
            ("phi_c1", PHI_C_RANGE),
        ):
            v = getattr(self, name)
            if not lo <= v <= hi:
                raise ValueError(f"{name}={v} outside control range [{lo}, {hi}]")

    def as_array(self) -> np.ndarray:
        return np.array([self.phi_q1, self.phi_q2, self.phi_c1])

    @classmethod
    def from_array(cls, arr) -> "ControlFlux":
        return cls(*(float(v) for v in arr))


@dataclass(frozen=True)
class FrameConfig:
    """Global rotating-frame frequency (GHz), shared by all three modes.

    Defaults to the qubit frequency at maximum qubit flux so that qubit
    detunings are non-negative across the control range. Persisted with
    every dataset and checkpoint.
    """

    omega0: float = DEFAULT_OMEGA0

    def __post_init__(self):
        if self.omega0 <= 0:
            raise ValueError("omega0 must be strictly positive")


@dataclass(frozen=True)
class MeasurementPair:
    """(initial product state, observable) probe on the two qubits."""

    state_q1: str
    state_q2: str
    observable: str

    def __post_init__(self):
        if self.state_q1 not in STATE_LABELS or self.state_q2 not in STATE_LABELS:
            raise ValueError(f"state labels must be one of {STATE_LABELS}")
        if self.observable not in OBSERVABLE_LABELS:
            raise ValueError(
                f"observable {self.observable!r} must be a non-identity "
                "two-qubit Pauli string"
            )

    def label(self) -> str:
        return f"({self.state_q1},{self.state_q2}):{self.observable}"


def bare_frequencies(
    q: QubitConstants, eta: DeviceParams, phi: ControlFlux
) -> tuple[float, float, float]:
    """Flux-dependent bare mode frequencies (q1, q2, c1) in GHz."""
    return (
        mode_frequency(q.ej0_q1, q.ec_q1, phi.phi_q1),
        mode_frequency(q.ej0_q2, q.ec_q2, phi.phi_q2),
        mode_frequency(eta.ej0_c1, eta.ec_c1, phi.phi_c1),
    )


def bare_couplings(
    q: QubitConstants, eta: DeviceParams, phi: ControlFlux
) -> tuple[float, float, float]:
    """Flux-dependent coupling rates (g_q1c1, g_q2c1, g_q1q2) in GHz."""
    ej_q1 = q.ej0_q1 * abs(math.cos(phi.phi_q1 / 2.0))
    ej_q2 = q.ej0_q2 * abs(math.cos(phi.phi_q2 / 2.0))
    ej_c1 = eta.ej0_c1 * abs(math.cos(phi.phi_c1 / 2.0))
    return (
        coupling_rate(ej_q1, q.ec_q1, ej_c1, eta.ec_c1, eta.ec_q1c1),
        coupling_rate(ej_q2, q.ec_q2, ej_c1, eta.ec_c1, eta.ec_q2c1),
        coupling_rate(ej_q1, q.ec_q1, ej_q2, q.ec_q2, eta.ec_q1q2),
    )


def build_full_hamiltonian(
    q: QubitConstants,
    eta: DeviceParams,
    phi: ControlFlux,
    frame: FrameConfig,
) -> np.ndarray:
    """8x8 Hermitian RWA Hamiltonian in rad/ns.

    H = sum_i (Delta_i/2) Z_i + sum_{j<k} (g_jk/2)(X_j X_k + Y_j Y_k) with
    Delta_i = 2 pi (omega_i - omega0).
    """
    freqs = bare_frequencies(q, eta, phi)
    gs = bare_couplings(q, eta, phi)
    deltas = GHZ_TO_RADNS * (np.array(freqs) - frame.omega0)
    return kernels.build_coupled_h8(deltas, GHZ_TO_RADNS * np.array(gs))


def propagator(h: np.ndarray, t: float) -> np.ndarray:
    """U = exp(-i h t) via Hermitian eigendecomposition."""
    if t < 0:
        raise ValueError("evolution time must be non-negative")
    herm_defect = np.abs(h - h.conj().T).max()
    if herm_defect > 1e-12:
        raise ValueError(f"matrix is not Hermitian (defect {herm_defect:.2e})")
    return kernels.expm_hermitian(np.ascontiguousarray(h), float(t))


def initial_state(pair: MeasurementPair) -> np.ndarray:
    """Full-register state: the pair's product state with the coupler in |0>."""
    return np.kron(
        np.kron(STATE_VECTORS[pair.state_q1], STATE_VECTORS[pair.state_q2]),
        COUPLER_GROUND,
    )


def observable_full(pair: MeasurementPair) -> np.ndarray:
    """The pair's observable acting on the qubits, identity on the coupler."""
    return np.kron(observable_matrix(pair.observable), np.eye(2, dtype=np.complex128))


def simulate_measurement(
    q: QubitConstants,
    eta: DeviceParams,
    phi: ControlFlux,
    frame: FrameConfig,
    pair: MeasurementPair,
    t: float,
) -> float:
    """Noiseless expectation of the pair's observable after full evolution.

    Stands in for a hardware measurement: prepares the product state with
    the coupler in its bare ground state, evolves under the full three-mode
    model for t, and measures the qubit observable.
    """
    h = build_full_hamiltonian(q, eta, phi, frame)
    u = kernels.expm_hermitian(h, float(t))
    psi = u @ initial_state(pair)
    return float(np.real(psi.conj() @ (observable_full(pair) @ psi)))
