"""Pauli operators, basis conventions, and measurement tables.

Conventions used throughout the package:

* Each mode is a two-level system with basis ``(|0>, |1>)`` ordered
  ground-first. Composite indices are ``4*b_q1 + 2*b_q2 + b_c1`` (qubit 1
  most significant), so the coupler-ground qubit subspace sits at indices
  ``{0, 2, 4, 6}``.
* ``Z = |1><1| - |0><0|``: the excited state is the +1 eigenstate, so a mode
  detuned above the rotating frame contributes ``+delta/2 Z``. With this
  sign the coupler sitting above the qubits screens the direct exchange,
  i.e. the mediated term carries the sign of ``g1*g2/(w_q - w_c)``. X and Y
  are the standard matrices.
* State labels ("Z+", "X-", ...) name single-qubit Pauli eigenstates; under
  the convention above "Z+" prepares the excited state and "Z-" the ground
  state.
"""

from __future__ import annotations

import numpy as np

PAULI_I = np.eye(2, dtype=np.complex128)
PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=np.complex128)
PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=np.complex128)
PAULI_Z = np.array([[-1.0, 0.0], [0.0, 1.0]], dtype=np.complex128)

_SINGLE = {"I": PAULI_I, "X": PAULI_X, "Y": PAULI_Y, "Z": PAULI_Z}

# Effective two-qubit coefficient basis, fixed order.
COEFF_LABELS = ("ZI", "IZ", "XX", "YY", "ZZ")
PAULI_BASIS = np.stack(
    [np.kron(_SINGLE[a], _SINGLE[b]) for a, b in COEFF_LABELS]
)

# All two-qubit Pauli strings excluding the identity, in lexical order.
OBSERVABLE_LABELS = tuple(
    a + b for a in "IXYZ" for b in "IXYZ" if a + b != "II"
)
OBSERVABLES = np.stack(
    [np.kron(_SINGLE[s[0]], _SINGLE[s[1]]) for s in OBSERVABLE_LABELS]
)

# Single-qubit Pauli eigenstates, canonical label order.
STATE_LABELS = ("Z+", "Z-", "X+", "X-", "Y+", "Y-")
_SQRT2 = np.sqrt(2.0)
STATE_VECTORS = {
    "Z+": np.array([0.0, 1.0], dtype=np.complex128),
    "Z-": np.array([1.0, 0.0], dtype=np.complex128),
    "X+": np.array([1.0, 1.0], dtype=np.complex128) / _SQRT2,
    "X-": np.array([1.0, -1.0], dtype=np.complex128) / _SQRT2,
    "Y+": np.array([1.0, 1.0j], dtype=np.complex128) / _SQRT2,
    "Y-": np.array([1.0, -1.0j], dtype=np.complex128) / _SQRT2,
}

# Indices of the coupler-ground qubit subspace in the 8-dim basis.
QUBIT_SUBSPACE = np.array([0, 2, 4, 6], dtype=np.int64)

COUPLER_GROUND = np.array([1.0, 0.0], dtype=np.complex128)


def product_state(label_q1: str, label_q2: str) -> np.ndarray:
    """Two-qubit product state vector for a pair of eigenstate labels."""
    return np.kron(STATE_VECTORS[label_q1], STATE_VECTORS[label_q2])


def observable_matrix(pauli_string: str) -> np.ndarray:
    """4x4 matrix of a two-character Pauli string."""
    return np.kron(_SINGLE[pauli_string[0]], _SINGLE[pauli_string[1]])


# All 36 two-qubit product states as columns, canonical (q1-major) order.
PRODUCT_STATE_COLUMNS = np.stack(
    [product_state(a, b) for a in STATE_LABELS for b in STATE_LABELS],
    axis=1,
)


def verify_pauli_tables() -> None:
    """Internal consistency checks; cheap enough to run in tests."""
    for k, label in enumerate(COEFF_LABELS):
        m = PAULI_BASIS[k]
        assert np.allclose(m @ m, np.eye(4)), label
        assert np.allclose(m, m.conj().T), label
    assert PRODUCT_STATE_COLUMNS.shape == (4, 36)
    assert len(OBSERVABLE_LABELS) == 15
