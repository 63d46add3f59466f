"""Online recovery of device parameters from qubit-subspace measurements.

The trained network stays frozen; only the five device parameters are
optimized, bounded to the ensemble sampling box, with multiple random
restarts. Measurements are synthesized from the full three-mode simulator
(standing in for hardware). For the surrogate the loss gradient is
analytic (network backprop chained through the eigendecomposition
derivative of the 4x4 propagator); for other coefficient maps, such as the
exact reduction-pipeline oracle, finite differences are used.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import minimize

from . import kernels
from .dataset import EnsembleSpec
from .errors import AllRestartsFailedError
from .operators import observable_matrix, product_state
from .physics import (
    MHZ_TO_RADNS,
    ControlFlux,
    DeviceParams,
    FrameConfig,
    MeasurementPair,
    QubitConstants,
    build_full_hamiltonian,
    initial_state,
    observable_full,
)
from .reduction import effective_coefficients
from .surrogate import SurrogateModel, forward_batch

ADAPT_SCHEMA = "hamlearn-adapt"
ADAPT_VERSION = 1


@dataclass(frozen=True)
class AdaptConfig:
    """Bounds, restart budget, and evaluation time for adaptation."""

    eta_bounds: tuple[tuple[float, float], ...] = (
        (23.0, 28.0),
        (0.28, 0.32),
        (0.015, 0.025),
        (0.015, 0.025),
        (0.002, 0.004),
    )
    restarts: int = 5
    max_iterations: int = 100
    t: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("need at least one restart")
        for lo, hi in self.eta_bounds:
            if lo > hi:
                raise ValueError("invalid eta bounds")

    @classmethod
    def from_spec(cls, spec: EnsembleSpec, **kwargs) -> "AdaptConfig":
        return cls(eta_bounds=tuple(map(tuple, spec.eta_bounds())), **kwargs)


@dataclass
class MeasurementSet:
    """Expectation values aligned with (flux, pair) coordinates."""

    fluxes: list[ControlFlux]
    pairs: list[MeasurementPair]
    values: np.ndarray  # (n_fluxes, n_pairs)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (len(self.fluxes), len(self.pairs)):
            raise ValueError(
                f"values shape {self.values.shape} does not match "
                f"{len(self.fluxes)} fluxes x {len(self.pairs)} pairs"
            )


def pair_tables(pairs: list[MeasurementPair]) -> tuple[np.ndarray, np.ndarray]:
    """Stacked state vectors (4, P) and observables (P, 4, 4) for a pair list."""
    states = np.stack([product_state(p.state_q1, p.state_q2) for p in pairs], axis=1)
    obs = np.stack([observable_matrix(p.observable) for p in pairs])
    return np.ascontiguousarray(states), np.ascontiguousarray(obs)


def synthesize_measurements(
    q: QubitConstants,
    eta_true: DeviceParams,
    fluxes: list[ControlFlux],
    pairs: list[MeasurementPair],
    frame: FrameConfig,
    t: float,
) -> MeasurementSet:
    """Noiseless expectations from the full three-mode model (hardware stand-in)."""
    psi0 = np.stack([initial_state(p) for p in pairs], axis=1)
    obs8 = np.stack([observable_full(p) for p in pairs])
    values = np.empty((len(fluxes), len(pairs)))
    for j, phi in enumerate(fluxes):
        h = build_full_hamiltonian(q, eta_true, phi, frame)
        u = kernels.expm_hermitian(h, float(t))
        evolved = u @ psi0
        for p in range(len(pairs)):
            vec = obs8[p] @ evolved[:, p]
            values[j, p] = float(np.real(np.vdot(evolved[:, p], vec)))
    return MeasurementSet(fluxes=list(fluxes), pairs=list(pairs), values=values)


@dataclass
class PipelineOracle:
    """Exact (flux, eta) -> coefficients map through the reduction pipeline.

    Substituting this for the surrogate isolates the optimizer and the
    measurement design from network model error.
    """

    q: QubitConstants
    frame: FrameConfig
    t: float

    def coefficients_mhz(self, eta_arr: np.ndarray, phi_arr: np.ndarray) -> np.ndarray:
        h = build_full_hamiltonian(
            self.q,
            DeviceParams.from_array(eta_arr),
            ControlFlux.from_array(phi_arr),
            self.frame,
        )
        return effective_coefficients(h, self.t).c_true.as_array()


def _coefficients_for(model, eta_arr: np.ndarray, fluxes: list[ControlFlux]) -> np.ndarray:
    """(F, 5) coefficient predictions for one eta across fluxes."""
    if isinstance(model, SurrogateModel):
        phis = np.stack([f.as_array() for f in fluxes])
        x = np.hstack([phis, np.tile(eta_arr, (len(fluxes), 1))])
        return forward_batch(model, x)
    return np.stack([model.coefficients_mhz(eta_arr, f.as_array()) for f in fluxes])


def predict_expectations(
    model,
    eta: DeviceParams | np.ndarray,
    fluxes: list[ControlFlux],
    pairs: list[MeasurementPair],
    t: float,
) -> np.ndarray:
    """(F, P) expectations under the effective two-qubit model.

    The coefficient prediction is mapped to H_pred, the 4x4 propagator is
    built, and each pair's observable is evaluated on its product state.
    """
    eta_arr = eta.as_array() if isinstance(eta, DeviceParams) else np.asarray(eta)
    states, obs = pair_tables(pairs)
    coeffs = _coefficients_for(model, eta_arr, fluxes)
    values = np.empty((len(fluxes), len(pairs)))
    for j in range(len(fluxes)):
        u4 = kernels.u4_from_coeffs(coeffs[j] * MHZ_TO_RADNS, float(t))
        values[j] = kernels.pair_expectations(u4, states, obs)
    return values


def predicted_measurements(
    model,
    eta_true: DeviceParams,
    fluxes: list[ControlFlux],
    pairs: list[MeasurementPair],
    t: float,
) -> MeasurementSet:
    """Measurement set synthesized from the effective model itself.

    Used for optimizer-isolation tests: the target is exactly reachable, so
    any residual is attributable to the optimizer, not model error.
    """
    values = predict_expectations(model, eta_true, fluxes, pairs, t)
    return MeasurementSet(fluxes=list(fluxes), pairs=list(pairs), values=values)


@dataclass
class AdaptResult:
    eta_pred: DeviceParams
    best_loss: float
    best_restart: int
    restart_final_losses: list[float]
    traces: list[np.ndarray]
    wall_time_s: float
    extra: dict = field(default_factory=dict)


def adapt(model, measurements: MeasurementSet, cfg: AdaptConfig) -> AdaptResult:
    """Bounded L-BFGS fit of eta to the measurements, best of N restarts.

    Restart initializations are uniform within the bounds and deterministic
    given cfg.seed; ties between equal final losses resolve to the lower
    restart index. Raises AllRestartsFailedError if no restart improves on
    its starting loss.
    """
    t0 = time.perf_counter()
    bounds = np.array(cfg.eta_bounds, dtype=np.float64)
    fluxes = measurements.fluxes
    meas = measurements.values
    states, obs = pair_tables(measurements.pairs)

    analytic = isinstance(model, SurrogateModel)
    if analytic:
        phis = np.ascontiguousarray(np.stack([f.as_array() for f in fluxes]))
        w = model.weight_tuple()

        def objective(eta_arr):
            return kernels.adapt_loss_and_grad(
                np.ascontiguousarray(eta_arr), phis, meas, *w,
                model.input_mean, model.input_std, states, obs, float(cfg.t),
            )

    else:

        def objective(eta_arr):
            coeffs = _coefficients_for(model, eta_arr, fluxes)
            loss = 0.0
            for j in range(len(fluxes)):
                u4 = kernels.u4_from_coeffs(coeffs[j] * MHZ_TO_RADNS, float(cfg.t))
                r = kernels.pair_expectations(u4, states, obs) - meas[j]
                loss += float(r @ r)
            return loss

    rng = np.random.default_rng(cfg.seed)
    starts = rng.uniform(bounds[:, 0], bounds[:, 1], size=(cfg.restarts, 5))
    fd_steps = 1e-4 * np.maximum(bounds[:, 1] - bounds[:, 0], 1e-6)

    best_loss = np.inf
    best_x = None
    best_restart = -1
    finals: list[float] = []
    traces: list[np.ndarray] = []
    any_improved = False
    for r in range(cfg.restarts):
        x0 = starts[r]
        trace: list[float] = []

        def record(intermediate_result):
            trace.append(float(intermediate_result.fun))

        if analytic:
            f0 = objective(x0)[0]
            res = minimize(
                objective, x0, jac=True, method="L-BFGS-B",
                bounds=bounds, callback=record,
                options={"maxiter": cfg.max_iterations, "ftol": 1e-15, "gtol": 1e-12},
            )
        else:
            f0 = objective(x0)
            res = minimize(
                objective, x0, method="L-BFGS-B",
                bounds=bounds, callback=record,
                options={
                    "maxiter": cfg.max_iterations,
                    "ftol": 1e-15,
                    "gtol": 1e-12,
                    "eps": fd_steps,
                },
            )
        finals.append(float(res.fun))
        traces.append(np.array([f0] + trace))
        if res.fun <= f0 + 1e-15:
            any_improved = True
        if res.fun < best_loss:
            best_loss = float(res.fun)
            best_x = res.x.copy()
            best_restart = r

    if not any_improved or best_x is None:
        raise AllRestartsFailedError(
            "every restart ended above its starting loss; measurements and "
            "model are likely inconsistent"
        )
    return AdaptResult(
        eta_pred=DeviceParams.from_array(best_x),
        best_loss=best_loss,
        best_restart=best_restart,
        restart_final_losses=finals,
        traces=traces,
        wall_time_s=time.perf_counter() - t0,
    )


def save_adapt_results(
    results: dict[int, AdaptResult], path: str | Path, extra_header: dict | None = None
) -> None:
    from .persist import atomic_write_text, canonical_json

    payload = {
        "schema": ADAPT_SCHEMA,
        "version": ADAPT_VERSION,
        "devices": {
            str(idx): {
                "eta_pred": list(res.eta_pred.as_array()),
                "best_loss": res.best_loss,
                "best_restart": res.best_restart,
                "restart_final_losses": res.restart_final_losses,
                "wall_time_s": res.wall_time_s,
            }
            for idx, res in results.items()
        },
    }
    if extra_header:
        payload.update(extra_header)
    atomic_write_text(path, canonical_json(payload) + "\n")


def load_adapt_results(path: str | Path) -> dict[int, dict]:
    from .persist import require_schema

    path = Path(path)
    with open(path) as fh:
        payload = json.load(fh)
    require_schema(payload, ADAPT_SCHEMA, ADAPT_VERSION, path)
    return {int(k): v for k, v in payload["devices"].items()}
