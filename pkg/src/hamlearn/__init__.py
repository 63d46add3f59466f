"""hamlearn: learned effective two-qubit Hamiltonians for coupler devices.

A simulated transmon-coupler-transmon ensemble supervises a small network
that maps (control fluxes, device parameters) to effective Pauli
coefficients; new devices are characterized online by fitting only their
parameter vector to a handful of qubit-subspace measurements. A
second-order perturbative baseline and an evaluation harness round out the
pipeline.
"""

__version__ = "0.1.0"

from .physics import (  # noqa: F401
    ControlFlux,
    DeviceParams,
    FrameConfig,
    MeasurementPair,
    QubitConstants,
)
from .reduction import CoefficientVector  # noqa: F401
