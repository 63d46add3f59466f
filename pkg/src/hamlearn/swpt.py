"""Second-order Schrieffer-Wolff baseline and hybridization diagnostics.

Evaluated on a device's true parameters; predicts zero ZZ by construction
(the two-level truncation has no fourth-order term here).
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ResonanceError
from .physics import (
    ControlFlux,
    DeviceParams,
    FrameConfig,
    QubitConstants,
    bare_couplings,
    bare_frequencies,
)
from .reduction import CoefficientVector

RESONANCE_TOLERANCE_GHZ = 1e-6


@dataclass(frozen=True)
class HybridizationReport:
    """Perturbative order parameters |g_qc / (w_q - w_c)| for both qubits."""

    ratio_q1: float
    ratio_q2: float

    @property
    def max_ratio(self) -> float:
        return max(self.ratio_q1, self.ratio_q2)


def lamb_shifted_frequency(omega: float, g: float, detuning: float) -> float:
    """Second-order dressed qubit frequency omega + g^2/detuning (GHz)."""
    return omega + g * g / detuning


def effective_exchange(g1c: float, g2c: float, d1: float, d2: float, g12: float) -> float:
    """g1c*g2c/Delta + g12 with 1/Delta the mean of the inverse detunings (GHz)."""
    inv_delta = 0.5 * (1.0 / d1 + 1.0 / d2)
    return g1c * g2c * inv_delta + g12


def swpt_coefficients(
    q: QubitConstants,
    eta: DeviceParams,
    phi: ControlFlux,
    frame: FrameConfig,
) -> CoefficientVector:
    """Second-order effective coefficients in MHz.

    c_ZI = (w~_q1 - omega0)/2 * 1e3 with w~_j = w_j + g_jc^2/(w_j - w_c);
    c_XX = c_YY = g_eff/2 * 1e3; c_ZZ = 0 identically at this order.
    """
    w_q1, w_q2, w_c1 = bare_frequencies(q, eta, phi)
    g1c, g2c, g12 = bare_couplings(q, eta, phi)
    d1 = w_q1 - w_c1
    d2 = w_q2 - w_c1
    if min(abs(d1), abs(d2)) < RESONANCE_TOLERANCE_GHZ:
        raise ResonanceError(
            f"qubit-coupler detuning below {RESONANCE_TOLERANCE_GHZ} GHz "
            f"(d1={d1:.2e}, d2={d2:.2e}); the expansion diverges"
        )
    g_eff = effective_exchange(g1c, g2c, d1, d2, g12)
    wt1 = lamb_shifted_frequency(w_q1, g1c, d1)
    wt2 = lamb_shifted_frequency(w_q2, g2c, d2)
    return CoefficientVector(
        c_zi=(wt1 - frame.omega0) / 2.0 * 1e3,
        c_iz=(wt2 - frame.omega0) / 2.0 * 1e3,
        c_xx=g_eff / 2.0 * 1e3,
        c_yy=g_eff / 2.0 * 1e3,
        c_zz=0.0,
    )


def hybridization_ratios(
    q: QubitConstants, eta: DeviceParams, phi: ControlFlux
) -> HybridizationReport:
    """|g_qi,c1 / (w_qi - w_c1)| for i = 1, 2 at the given flux point.

    Uses bare (frame-independent) frequencies; raises ResonanceError at
    numerically zero detuning instead of reporting an infinite ratio.
    """
    w_q1, w_q2, w_c1 = bare_frequencies(q, eta, phi)
    g1c, g2c, _ = bare_couplings(q, eta, phi)
    d1 = w_q1 - w_c1
    d2 = w_q2 - w_c1
    if min(abs(d1), abs(d2)) < RESONANCE_TOLERANCE_GHZ:
        raise ResonanceError("qubit-coupler detuning is numerically zero")
    return HybridizationReport(ratio_q1=abs(g1c / d1), ratio_q2=abs(g2c / d2))
