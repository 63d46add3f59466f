"""Device-ensemble sampling, supervised record generation, and persistence.

Datasets are newline-delimited JSON: a header object carrying the schema
version, ensemble spec, frame, qubit constants, and evolution time,
followed by one record object per (device, pulse) pair in device-major
order. Identical specs and seeds reproduce byte-identical files.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import HamlearnError
from .physics import ControlFlux, DeviceParams, FrameConfig, QubitConstants, build_full_hamiltonian
from .reduction import CoefficientVector, effective_coefficients

DATASET_SCHEMA = "hamlearn-dataset"
DATASET_VERSION = 1

# Sub-stream tags so device draws, standalone pulse draws, and per-device
# pulse draws never overlap for the same base seed.
_DEVICE_STREAM = 1
_PULSE_STREAM = 2


@dataclass(frozen=True)
class EnsembleSpec:
    """Uniform sampling box for device parameters and control fluxes.

    Bounds are (low, high) pairs in GHz for the five device energies and in
    rad for the three flux axes; degenerate (low == high) bounds pin an
    axis. Defaults are the reference device ranges.
    """

    ej0_c1: tuple[float, float] = (23.0, 28.0)
    ec_c1: tuple[float, float] = (0.28, 0.32)
    ec_q1c1: tuple[float, float] = (0.015, 0.025)
    ec_q2c1: tuple[float, float] = (0.015, 0.025)
    ec_q1q2: tuple[float, float] = (0.002, 0.004)
    phi_q1: tuple[float, float] = (0.0, 0.5)
    phi_q2: tuple[float, float] = (0.0, 0.5)
    phi_c1: tuple[float, float] = (0.1, 1.35)
    seed: int = 7

    _ETA_AXES = ("ej0_c1", "ec_c1", "ec_q1c1", "ec_q2c1", "ec_q1q2")
    _FLUX_AXES = ("phi_q1", "phi_q2", "phi_c1")

    def __post_init__(self):
        for name in self._ETA_AXES + self._FLUX_AXES:
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name}: lower bound {lo} exceeds upper bound {hi}")

    def eta_bounds(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in self._ETA_AXES])

    def flux_bounds(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in self._FLUX_AXES])

    def as_dict(self) -> dict:
        out = {n: list(getattr(self, n)) for n in self._ETA_AXES + self._FLUX_AXES}
        out["seed"] = self.seed
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "EnsembleSpec":
        kwargs = {n: tuple(d[n]) for n in cls._ETA_AXES + cls._FLUX_AXES}
        return cls(seed=int(d["seed"]), **kwargs)


def sample_ensemble(spec: EnsembleSpec, n: int) -> list[DeviceParams]:
    """n device-parameter draws, uniform in the spec box; seeded and repeatable."""
    if n < 1:
        raise ValueError("need at least one sample")
    bounds = spec.eta_bounds()
    rng = np.random.default_rng([spec.seed, _DEVICE_STREAM])
    draws = rng.uniform(bounds[:, 0], bounds[:, 1], size=(n, 5))
    return [DeviceParams.from_array(row) for row in draws]


def _pulse_array(spec: EnsembleSpec, m: int, device_index: int | None = None) -> np.ndarray:
    bounds = spec.flux_bounds()
    key = [spec.seed, _PULSE_STREAM]
    if device_index is not None:
        key.append(device_index)
    rng = np.random.default_rng(key)
    return rng.uniform(bounds[:, 0], bounds[:, 1], size=(m, 3))


def sample_pulses(spec: EnsembleSpec, m: int) -> list[ControlFlux]:
    """m control-flux draws, uniform in the spec box; seeded and repeatable."""
    if m < 1:
        raise ValueError("need at least one sample")
    return [ControlFlux.from_array(row) for row in _pulse_array(spec, m)]


@dataclass
class DatasetRecord:
    """One supervised example: inputs, spectral seed, refined target, diagnostics."""

    device_index: int
    pulse_index: int
    eta: DeviceParams
    phi: ControlFlux
    c_dress: CoefficientVector | None
    c_true: CoefficientVector | None
    fidelity_true: float | None
    residual_norm: float | None
    flags: dict = field(default_factory=dict)

    @property
    def usable(self) -> bool:
        return not self.flags.get("excluded", False)

    def to_json_obj(self) -> dict:
        return {
            "device_index": self.device_index,
            "pulse_index": self.pulse_index,
            "eta": list(self.eta.as_array()),
            "phi": list(self.phi.as_array()),
            "c_dress": None if self.c_dress is None else list(self.c_dress.as_array()),
            "c_true": None if self.c_true is None else list(self.c_true.as_array()),
            "fidelity_true": self.fidelity_true,
            "residual_norm": self.residual_norm,
            "flags": self.flags,
        }

    @classmethod
    def from_json_obj(cls, d: dict) -> "DatasetRecord":
        return cls(
            device_index=int(d["device_index"]),
            pulse_index=int(d["pulse_index"]),
            eta=DeviceParams.from_array(d["eta"]),
            phi=ControlFlux.from_array(d["phi"]),
            c_dress=None if d["c_dress"] is None else CoefficientVector.from_array(d["c_dress"]),
            c_true=None if d["c_true"] is None else CoefficientVector.from_array(d["c_true"]),
            fidelity_true=d["fidelity_true"],
            residual_norm=d["residual_norm"],
            flags=dict(d["flags"]),
        )


@dataclass
class Dataset:
    """Records plus the header metadata needed to regenerate or replay them."""

    qubit: QubitConstants
    spec: EnsembleSpec
    frame: FrameConfig
    t: float
    records: list[DatasetRecord]

    def usable_records(self) -> list[DatasetRecord]:
        return [r for r in self.records if r.usable]


def make_record(
    q: QubitConstants,
    eta: DeviceParams,
    phi: ControlFlux,
    frame: FrameConfig,
    t: float,
    device_index: int = 0,
    pulse_index: int = 0,
) -> DatasetRecord:
    """Run the reduction pipeline for one (device, pulse) pair.

    Pipeline errors (degenerate selection, flux domain) are captured in the
    record flags rather than raised.
    """
    try:
        h = build_full_hamiltonian(q, eta, phi, frame)
        out = effective_coefficients(h, t)
    except HamlearnError as exc:
        return DatasetRecord(
            device_index=device_index,
            pulse_index=pulse_index,
            eta=eta,
            phi=phi,
            c_dress=None,
            c_true=None,
            fidelity_true=None,
            residual_norm=None,
            flags={"excluded": True, "tie": "weights" in str(exc), "error": str(exc)},
        )
    return DatasetRecord(
        device_index=device_index,
        pulse_index=pulse_index,
        eta=eta,
        phi=phi,
        c_dress=out.c_dress,
        c_true=out.c_true,
        fidelity_true=out.fidelity_true,
        residual_norm=out.residual_mhz,
        flags={
            "excluded": False,
            "tie": False,
            "error": None,
            "refine_improved": out.refine_improved,
        },
    )


def _device_records(args) -> list[DatasetRecord]:
    q, spec, frame, t, device_index, eta, m = args
    pulses = _pulse_array(spec, m, device_index)
    return [
        make_record(q, eta, ControlFlux.from_array(p), frame, t, device_index, j)
        for j, p in enumerate(pulses)
    ]


def generate_dataset(
    q: QubitConstants,
    devices: list[DeviceParams],
    pulses_per_device: int,
    frame: FrameConfig,
    t: float,
    spec: EnsembleSpec,
    workers: int = 1,
) -> Dataset:
    """Supervised records for every (device, pulse) pair, device-major order.

    Pulses are drawn per device from sub-seeded streams of the spec seed, so
    the result is deterministic for any worker count.
    """
    jobs = [
        (q, spec, frame, t, i, eta, pulses_per_device)
        for i, eta in enumerate(devices)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_device = list(pool.map(_device_records, jobs))
    else:
        per_device = [_device_records(job) for job in jobs]
    records = [rec for group in per_device for rec in group]
    return Dataset(qubit=q, spec=spec, frame=frame, t=t, records=records)


def persist_dataset(dataset: Dataset, path: str | Path, extra_header: dict | None = None) -> None:
    """Write header + records as canonical JSON lines (atomic replace)."""
    from .persist import atomic_write_text, canonical_json

    header = {
        "schema": DATASET_SCHEMA,
        "version": DATASET_VERSION,
        "qubit": {
            "ej0_q1": dataset.qubit.ej0_q1,
            "ej0_q2": dataset.qubit.ej0_q2,
            "ec_q1": dataset.qubit.ec_q1,
            "ec_q2": dataset.qubit.ec_q2,
        },
        "ensemble": dataset.spec.as_dict(),
        "frame": {"omega0": dataset.frame.omega0},
        "t": dataset.t,
        "count": len(dataset.records),
    }
    if extra_header:
        header.update(extra_header)
    lines = [canonical_json(header)]
    lines.extend(canonical_json(r.to_json_obj()) for r in dataset.records)
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_dataset(path: str | Path) -> Dataset:
    """Read a dataset file back; raises SchemaVersionError on a version mismatch."""
    from .persist import require_schema

    path = Path(path)
    with open(path) as fh:
        header = json.loads(fh.readline())
        require_schema(header, DATASET_SCHEMA, DATASET_VERSION, path)
        records = [DatasetRecord.from_json_obj(json.loads(line)) for line in fh if line.strip()]
    qubit = QubitConstants(**header["qubit"])
    spec = EnsembleSpec.from_dict(header["ensemble"])
    frame = FrameConfig(omega0=header["frame"]["omega0"])
    return Dataset(qubit=qubit, spec=spec, frame=frame, t=header["t"], records=records)
