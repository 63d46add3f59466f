"""Measurement-pair selection and adapt-time flux spreading.

The candidate set is every tensor product of single-qubit Pauli eigenstates
(36 states) against every non-identity two-qubit Pauli (15 observables).
Informativeness of a candidate is the variance of its predicted expectation
value across random draws of (device, flux); the greedy selector then picks
pairs by residual variance after orthogonalization against the already
selected signals, which is pivoted-QR column ordering on the mean-centered
signal matrix.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .dataset import EnsembleSpec
from .errors import RankDeficiencyError
from .operators import (
    OBSERVABLE_LABELS,
    OBSERVABLES,
    PRODUCT_STATE_COLUMNS,
    STATE_LABELS,
)
from .physics import MHZ_TO_RADNS, ControlFlux, MeasurementPair
from .surrogate import SurrogateModel, forward_batch

SELECTION_SCHEMA = "hamlearn-selection"
SELECTION_VERSION = 1

DEFAULT_N_DRAWS = 500
DEFAULT_N_PAIRS = 7
DEFAULT_N_FLUXES = 20


def build_candidates() -> list[MeasurementPair]:
    """All 540 candidate pairs in canonical (state-major) order."""
    return [
        MeasurementPair(s1, s2, obs)
        for s1 in STATE_LABELS
        for s2 in STATE_LABELS
        for obs in OBSERVABLE_LABELS
    ]


@dataclass
class SignalMatrix:
    """Predicted expectations across draws; one column per candidate pair."""

    values: np.ndarray  # (n_draws, 540)
    pairs: list[MeasurementPair]

    @property
    def raw_variance(self) -> np.ndarray:
        return self.values.var(axis=0)


def informativeness_signals(
    model: SurrogateModel,
    spec: EnsembleSpec,
    n_draws: int = DEFAULT_N_DRAWS,
    t: float = 1.0,
    seed: int = 0,
) -> SignalMatrix:
    """Predicted expectations for all candidates across (eta, phi) draws."""
    pairs = build_candidates()
    rng = np.random.default_rng([seed, 3])
    eta_b = spec.eta_bounds()
    flux_b = spec.flux_bounds()
    etas = rng.uniform(eta_b[:, 0], eta_b[:, 1], size=(n_draws, 5))
    phis = rng.uniform(flux_b[:, 0], flux_b[:, 1], size=(n_draws, 3))
    coeffs = forward_batch(model, np.hstack([phis, etas]))
    values = np.empty((n_draws, len(pairs)))
    for i in range(n_draws):
        u4 = kernels.u4_from_coeffs(coeffs[i] * MHZ_TO_RADNS, float(t))
        values[i] = kernels.signal_expectations(u4, PRODUCT_STATE_COLUMNS, OBSERVABLES)
    return SignalMatrix(values=values, pairs=pairs)


@dataclass
class SelectionResult:
    """Greedy pick order with raw and marginal informativeness per pick."""

    indices: list[int]
    pairs: list[MeasurementPair]
    raw: np.ndarray
    marginal: np.ndarray


RANK_TOLERANCE = 1e-10


def greedy_select(sig: SignalMatrix | np.ndarray, k: int) -> SelectionResult:
    """Variance-greedy orthogonalized selection of k columns.

    Columns are mean-centered; the first pick maximizes variance, each
    subsequent pick maximizes residual variance after projecting out the
    span of the already-selected signals (modified Gram-Schmidt). Ties break
    toward the lowest column index. Raises RankDeficiencyError when k
    exceeds the numerical rank (relative tolerance 1e-10 on residual column
    norms).
    """
    if isinstance(sig, SignalMatrix):
        values, pairs = sig.values, sig.pairs
    else:
        values, pairs = np.asarray(sig, dtype=np.float64), None
    n_draws, n_cols = values.shape
    if not 1 <= k <= n_cols:
        raise ValueError(f"k={k} out of range for {n_cols} candidates")

    centered = values - values.mean(axis=0)
    raw_var = (centered * centered).sum(axis=0) / n_draws
    resid = centered.copy()
    scale = np.sqrt(raw_var.max())

    chosen: list[int] = []
    marginal = np.empty(k)
    available = np.ones(n_cols, dtype=bool)
    for step in range(k):
        norms2 = (resid * resid).sum(axis=0)
        norms2[~available] = -1.0
        j = int(np.argmax(norms2))
        if np.sqrt(max(norms2[j], 0.0) / n_draws) <= RANK_TOLERANCE * scale:
            raise RankDeficiencyError(
                f"requested {k} picks but the centered signal matrix has "
                f"numerical rank {step}"
            )
        chosen.append(j)
        marginal[step] = norms2[j] / n_draws
        available[j] = False
        q = resid[:, j] / np.sqrt(norms2[j])
        resid -= np.outer(q, q @ resid)

    return SelectionResult(
        indices=chosen,
        pairs=[pairs[j] for j in chosen] if pairs is not None else [],
        raw=raw_var[chosen],
        marginal=marginal,
    )


def fps_select_fluxes(pool: list[ControlFlux], n: int) -> list[ControlFlux]:
    """Farthest-point subsample of a flux pool, deterministic and seedless.

    Axes are rescaled to unit standard deviation over the pool; the walk
    starts at the point nearest the pool centroid and greedily adds the
    point with the largest minimum distance to the selected set. Ties break
    toward the lowest pool index.
    """
    if not pool:
        raise ValueError("flux pool is empty")
    if not 1 <= n <= len(pool):
        raise ValueError(f"cannot select {n} fluxes from a pool of {len(pool)}")
    pts = np.stack([p.as_array() for p in pool])
    std = pts.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    scaled = pts / std

    centroid = scaled.mean(axis=0)
    start = int(np.argmin(((scaled - centroid) ** 2).sum(axis=1)))
    chosen = [start]
    min_d2 = ((scaled - scaled[start]) ** 2).sum(axis=1)
    for _ in range(n - 1):
        min_d2[chosen] = -1.0
        nxt = int(np.argmax(min_d2))
        chosen.append(nxt)
        d2 = ((scaled - scaled[nxt]) ** 2).sum(axis=1)
        min_d2 = np.minimum(min_d2, d2)
    return [pool[i] for i in chosen]


def save_selection(
    result: SelectionResult,
    fluxes: list[ControlFlux],
    path: str | Path,
    extra_header: dict | None = None,
) -> None:
    from .persist import atomic_write_text, canonical_json

    payload = {
        "schema": SELECTION_SCHEMA,
        "version": SELECTION_VERSION,
        "pairs": [
            {
                "state_q1": p.state_q1,
                "state_q2": p.state_q2,
                "observable": p.observable,
                "raw": float(result.raw[i]),
                "marginal": float(result.marginal[i]),
            }
            for i, p in enumerate(result.pairs)
        ],
        "fluxes": [list(f.as_array()) for f in fluxes],
    }
    if extra_header:
        payload.update(extra_header)
    atomic_write_text(path, canonical_json(payload) + "\n")


def load_selection(path: str | Path) -> tuple[list[MeasurementPair], list[ControlFlux], dict]:
    from .persist import require_schema

    path = Path(path)
    with open(path) as fh:
        payload = json.load(fh)
    require_schema(payload, SELECTION_SCHEMA, SELECTION_VERSION, path)
    pairs = [
        MeasurementPair(p["state_q1"], p["state_q2"], p["observable"])
        for p in payload["pairs"]
    ]
    fluxes = [ControlFlux.from_array(f) for f in payload["fluxes"]]
    return pairs, fluxes, payload
