"""Feed-forward surrogate mapping (flux, device parameters) to coefficients.

Architecture: 8 -> 64 -> 64 -> 64 -> 5 with SiLU hidden activations and an
identity output head. Inputs are standardized per feature with training-set
statistics; outputs are regressed directly in MHz. Training is full-batch
Adam with a reduce-on-plateau schedule and early stopping, all in float64
for reproducibility.

Feature order: (phi_q1, phi_q2, phi_c1, ej0_c1, ec_c1, ec_q1c1, ec_q2c1,
ec_q1q2).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .dataset import DatasetRecord, EnsembleSpec
from .errors import MetadataMismatchError, SchemaVersionError, TrainingDivergedError
from .physics import ControlFlux, DeviceParams, FrameConfig
from .reduction import CoefficientVector

CHECKPOINT_SCHEMA = "hamlearn-checkpoint"
CHECKPOINT_VERSION = 1

HIDDEN_DIM = 64
N_FEATURES = 8
N_OUTPUTS = 5
_LAYER_SHAPES = (
    (N_FEATURES, HIDDEN_DIM),
    (HIDDEN_DIM, HIDDEN_DIM),
    (HIDDEN_DIM, HIDDEN_DIM),
    (HIDDEN_DIM, N_OUTPUTS),
)
_WEIGHT_NAMES = ("w1", "b1", "w2", "b2", "w3", "b3", "w4", "b4")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 2e-2
    plateau_patience: int = 500
    decay_factor: float = 0.5
    min_learning_rate: float = 1e-7
    early_stop_patience: int = 600
    max_epochs: int = 100_000
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0 or self.min_learning_rate <= 0:
            raise ValueError("learning rates must be positive")
        if self.plateau_patience < 1 or self.early_stop_patience < 1:
            raise ValueError("patience values must be >= 1")


@dataclass
class SurrogateModel:
    """Weights plus input normalization and provenance metadata."""

    weights: list[np.ndarray]
    input_mean: np.ndarray
    input_std: np.ndarray
    metadata: dict = field(default_factory=dict)

    def weight_tuple(self):
        return tuple(self.weights)

    def copy(self) -> "SurrogateModel":
        return SurrogateModel(
            weights=[w.copy() for w in self.weights],
            input_mean=self.input_mean.copy(),
            input_std=self.input_std.copy(),
            metadata=dict(self.metadata),
        )


def init_model(seed: int, metadata: dict | None = None) -> SurrogateModel:
    """Fan-in-scaled normal initialization: W ~ N(0, 1/fan_in), biases zero."""
    rng = np.random.default_rng(seed)
    weights: list[np.ndarray] = []
    for n_in, n_out in _LAYER_SHAPES:
        weights.append(rng.normal(0.0, 1.0 / np.sqrt(n_in), size=(n_in, n_out)))
        weights.append(np.zeros(n_out))
    return SurrogateModel(
        weights=weights,
        input_mean=np.zeros(N_FEATURES),
        input_std=np.ones(N_FEATURES),
        metadata=dict(metadata or {}),
    )


def features(eta: DeviceParams, phi: ControlFlux) -> np.ndarray:
    return np.concatenate([phi.as_array(), eta.as_array()])


def forward_batch(model: SurrogateModel, x_raw: np.ndarray) -> np.ndarray:
    """Predicted coefficients (MHz) for raw feature rows (N, 8)."""
    xn = (np.atleast_2d(x_raw) - model.input_mean) / model.input_std
    return kernels.mlp_forward_batch(np.ascontiguousarray(xn), *model.weight_tuple())


def forward(model: SurrogateModel, eta: DeviceParams, phi: ControlFlux) -> CoefficientVector:
    return CoefficientVector.from_array(forward_batch(model, features(eta, phi))[0])


def records_to_arrays(records: list[DatasetRecord]) -> tuple[np.ndarray, np.ndarray]:
    """Feature matrix and target matrix (MHz) from usable records."""
    usable = [r for r in records if r.usable]
    if not usable:
        raise ValueError("no usable records")
    x = np.stack([np.concatenate([r.phi.as_array(), r.eta.as_array()]) for r in usable])
    y = np.stack([r.c_true.as_array() for r in usable])
    return x, y


@dataclass
class TrainHistory:
    losses: np.ndarray
    learning_rates: np.ndarray
    best_epoch: int
    best_loss: float
    stop_reason: str


def train(
    model: SurrogateModel,
    records: list[DatasetRecord],
    cfg: TrainConfig,
    metadata: dict | None = None,
) -> tuple[SurrogateModel, TrainHistory]:
    """Full-batch Adam on the summed squared coefficient error (MHz^2).

    Returns the best-loss checkpoint (not the final iterate) and the
    per-epoch loss / learning-rate history. Raises TrainingDivergedError if
    the loss becomes non-finite.
    """
    x_raw, y = records_to_arrays(records)
    mean = x_raw.mean(axis=0)
    std = x_raw.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    xn = np.ascontiguousarray((x_raw - mean) / std)
    y = np.ascontiguousarray(y)

    model = model.copy()
    model.input_mean = mean
    model.input_std = std
    params = model.weights
    m_adam = [np.zeros_like(w) for w in params]
    v_adam = [np.zeros_like(w) for w in params]

    lr = cfg.learning_rate
    best_loss = np.inf
    best_weights = [w.copy() for w in params]
    best_epoch = 0
    epochs_since_best = 0
    plateau_counter = 0
    losses = np.empty(cfg.max_epochs)
    rates = np.empty(cfg.max_epochs)
    stop_reason = "max_epochs"
    n_done = 0

    for epoch in range(cfg.max_epochs):
        loss, *grads = kernels.mlp_loss_and_grads(xn, y, *params)
        if not np.isfinite(loss):
            raise TrainingDivergedError(
                f"loss became non-finite at epoch {epoch} (lr={lr:.3e})"
            )
        losses[epoch] = loss
        rates[epoch] = lr
        n_done = epoch + 1

        if loss < best_loss:
            best_loss = loss
            best_epoch = epoch
            for bw, w in zip(best_weights, params):
                np.copyto(bw, w)
            epochs_since_best = 0
            plateau_counter = 0
        else:
            epochs_since_best += 1
            plateau_counter += 1

        if epochs_since_best >= cfg.early_stop_patience:
            stop_reason = "early_stop"
            break
        if plateau_counter >= cfg.plateau_patience:
            lr = max(lr * cfg.decay_factor, cfg.min_learning_rate)
            plateau_counter = 0

        tstep = epoch + 1
        bc1 = 1.0 - cfg.adam_beta1 ** tstep
        bc2 = 1.0 - cfg.adam_beta2 ** tstep
        for i, g in enumerate(grads):
            m_adam[i] = cfg.adam_beta1 * m_adam[i] + (1.0 - cfg.adam_beta1) * g
            v_adam[i] = cfg.adam_beta2 * v_adam[i] + (1.0 - cfg.adam_beta2) * (g * g)
            params[i] -= lr * (m_adam[i] / bc1) / (np.sqrt(v_adam[i] / bc2) + cfg.adam_eps)

    model.weights = best_weights
    model.metadata.update(metadata or {})
    model.metadata.update(
        {
            "train_seed": cfg.seed,
            "best_epoch": best_epoch,
            "best_loss": float(best_loss),
            "epochs_run": n_done,
            "stop_reason": stop_reason,
        }
    )
    history = TrainHistory(
        losses=losses[:n_done].copy(),
        learning_rates=rates[:n_done].copy(),
        best_epoch=best_epoch,
        best_loss=float(best_loss),
        stop_reason=stop_reason,
    )
    return model, history


def _single_record_loss(model: SurrogateModel, xn: np.ndarray, y: np.ndarray) -> float:
    pred = kernels.mlp_forward_batch(xn, *model.weight_tuple())
    r = pred - y
    return float(np.sum(r * r))


def gradient_check(
    model: SurrogateModel,
    record: DatasetRecord,
    n_entries: int = 120,
    seed: int = 0,
    step: float = 1e-5,
) -> float:
    """Backprop vs central finite differences on one record's loss.

    Checks >= n_entries randomly chosen weight entries. The per-entry
    relative error is |analytic - numeric| / max(|analytic|, |numeric|,
    1e-3 * max|gradient|): entries within three decades of the dominant
    gradient are compared at true relative precision, smaller ones against
    the gradient scale so that finite-difference roundoff on negligible
    entries cannot dominate the report. Steps are 1e-5 * max(1, |w|) on the
    normalized-input network.
    """
    x_raw = np.concatenate([record.phi.as_array(), record.eta.as_array()])[None, :]
    xn = np.ascontiguousarray((x_raw - model.input_mean) / model.input_std)
    y = np.ascontiguousarray(record.c_true.as_array()[None, :])

    _, *grads = kernels.mlp_loss_and_grads(xn, y, *model.weight_tuple())
    sizes = [w.size for w in model.weights]
    total = int(np.sum(sizes))
    rng = np.random.default_rng(seed)
    picks = rng.choice(total, size=min(max(n_entries, 100), total), replace=False)
    offsets = np.cumsum([0] + sizes)

    gmax = max(np.abs(g).max() for g in grads)
    floor = 1e-3 * max(1.0, gmax)
    work = model.copy()
    worst = 0.0
    for flat in picks:
        layer = int(np.searchsorted(offsets, flat, side="right") - 1)
        idx = np.unravel_index(flat - offsets[layer], model.weights[layer].shape)
        h = step * max(1.0, abs(model.weights[layer][idx]))
        orig = work.weights[layer][idx]
        work.weights[layer][idx] = orig + h
        lp = _single_record_loss(work, xn, y)
        work.weights[layer][idx] = orig - h
        lm = _single_record_loss(work, xn, y)
        work.weights[layer][idx] = orig
        numeric = (lp - lm) / (2.0 * h)
        analytic = grads[layer][idx]
        err = abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)
        worst = max(worst, err)
    return worst


def save_checkpoint(model: SurrogateModel, path: str | Path) -> None:
    from .persist import atomic_write_text, canonical_json

    payload = {
        "schema": CHECKPOINT_SCHEMA,
        "version": CHECKPOINT_VERSION,
        "weights": {
            name: w.tolist() for name, w in zip(_WEIGHT_NAMES, model.weights)
        },
        "input_mean": model.input_mean.tolist(),
        "input_std": model.input_std.tolist(),
        "metadata": model.metadata,
    }
    atomic_write_text(path, canonical_json(payload) + "\n")


def load_checkpoint(path: str | Path) -> SurrogateModel:
    from .persist import require_schema

    path = Path(path)
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise SchemaVersionError(f"{path}: not a readable checkpoint ({exc})") from exc
    require_schema(payload, CHECKPOINT_SCHEMA, CHECKPOINT_VERSION, path)
    weights = []
    for name, (n_in, n_out) in zip(("w1", "w2", "w3", "w4"), _LAYER_SHAPES):
        w = np.asarray(payload["weights"][name], dtype=np.float64)
        b = np.asarray(payload["weights"]["b" + name[1]], dtype=np.float64)
        if w.shape != (n_in, n_out) or b.shape != (n_out,):
            raise SchemaVersionError(f"{path}: layer {name} has shape {w.shape}")
        weights.extend([w, b])
    return SurrogateModel(
        weights=weights,
        input_mean=np.asarray(payload["input_mean"], dtype=np.float64),
        input_std=np.asarray(payload["input_std"], dtype=np.float64),
        metadata=payload.get("metadata", {}),
    )


def verify_metadata(
    model: SurrogateModel,
    frame: FrameConfig | None = None,
    spec: EnsembleSpec | None = None,
) -> None:
    """Check that a checkpoint was produced under the requested configuration."""
    meta = model.metadata
    if frame is not None:
        recorded = meta.get("frame", {}).get("omega0")
        if recorded is None or abs(recorded - frame.omega0) > 1e-12:
            raise MetadataMismatchError(
                f"checkpoint frame omega0={recorded} != requested {frame.omega0}"
            )
    if spec is not None:
        recorded = meta.get("ensemble")
        if recorded is not None and EnsembleSpec.from_dict(recorded) != spec:
            raise MetadataMismatchError(
                "checkpoint ensemble bounds differ from the requested spec"
            )
