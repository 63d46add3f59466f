"""Quantitative comparison of the learned model against the analytic baseline.

Produces the per-coefficient error table, hybridization diagnostics,
infidelity-floor curves, and coupler-flux sweeps, plus plot-ready CSV
emitters. Ground truth everywhere is the fidelity-refined reduction of the
true device; the learned model is evaluated at the adapted parameters and
the baseline on the true parameters.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .dataset import EnsembleSpec
from .errors import HamlearnError
from .operators import COEFF_LABELS
from .physics import ControlFlux, DeviceParams, FrameConfig, QubitConstants, build_full_hamiltonian
from .reduction import (
    CoefficientVector,
    effective_coefficients,
    process_fidelity,
)
from .design import SelectionResult, SignalMatrix
from .surrogate import SurrogateModel, forward
from .swpt import HybridizationReport, hybridization_ratios, swpt_coefficients

MODEL_NAME = "learned"
BASELINE_NAME = "swpt"

# Division guard for excess-infidelity ratios.
EXCESS_EPS = 1e-14


@dataclass
class CoefficientErrorReport:
    """Pooled per-term errors over the held-out evaluation set."""

    device_ids: np.ndarray
    truth: np.ndarray        # (M, 5) MHz
    learned: np.ndarray      # (M, 5)
    swpt: np.ndarray         # (M, 5)
    skipped_points: int

    mae_learned: np.ndarray = field(init=False)
    mae_swpt: np.ndarray = field(init=False)
    dynamic_range: np.ndarray = field(init=False)

    def __post_init__(self):
        self.mae_learned = np.abs(self.learned - self.truth).mean(axis=0)
        self.mae_swpt = np.abs(self.swpt - self.truth).mean(axis=0)
        self.dynamic_range = self.truth.max(axis=0) - self.truth.min(axis=0)

    def relative_pct(self, which: str) -> np.ndarray:
        mae = self.mae_learned if which == MODEL_NAME else self.mae_swpt
        return 100.0 * mae / self.dynamic_range

    def all_terms(self, which: str) -> tuple[float, float]:
        """(MAE, relative %) averaged over the five terms with equal weight."""
        mae = self.mae_learned if which == MODEL_NAME else self.mae_swpt
        return float(mae.mean()), float(self.relative_pct(which).mean())


def ground_truth_coefficients(
    q: QubitConstants,
    eta: DeviceParams,
    phi: ControlFlux,
    frame: FrameConfig,
    t: float,
) -> CoefficientVector:
    h = build_full_hamiltonian(q, eta, phi, frame)
    return effective_coefficients(h, t).c_true


def coefficient_error_report(
    model: SurrogateModel,
    adapted: dict[int, DeviceParams],
    devices: list[DeviceParams],
    q: QubitConstants,
    frame: FrameConfig,
    spec: EnsembleSpec,
    n_points: int = 300,
    t: float = 1.0,
    seed: int = 0,
) -> CoefficientErrorReport:
    """Per-term MAE of learned (adapted) and baseline predictions.

    Samples n_points fluxes per device uniformly from the control box.
    Points where the reduction fails (degenerate selection) are skipped and
    counted; all remaining (device, point) pairs pool with equal weight.
    """
    flux_b = spec.flux_bounds()
    rows_truth, rows_learned, rows_swpt, ids = [], [], [], []
    skipped = 0
    for idx, eta_true in enumerate(devices):
        eta_pred = adapted[idx]
        rng = np.random.default_rng([seed, 5, idx])
        phis = rng.uniform(flux_b[:, 0], flux_b[:, 1], size=(n_points, 3))
        for p in phis:
            phi = ControlFlux.from_array(p)
            try:
                c_truth = ground_truth_coefficients(q, eta_true, phi, frame, t)
                c_base = swpt_coefficients(q, eta_true, phi, frame)
            except HamlearnError:
                skipped += 1
                continue
            rows_truth.append(c_truth.as_array())
            rows_learned.append(forward(model, eta_pred, phi).as_array())
            rows_swpt.append(c_base.as_array())
            ids.append(idx)
    return CoefficientErrorReport(
        device_ids=np.array(ids),
        truth=np.stack(rows_truth),
        learned=np.stack(rows_learned),
        swpt=np.stack(rows_swpt),
        skipped_points=skipped,
    )


@dataclass
class InfidelityReport:
    """Floor-referenced infidelities along a coupler-flux sweep."""

    device_ids: np.ndarray
    phi_c1: np.ndarray
    g_eff_mhz: np.ndarray      # 2 * c_XX,true at each point
    i_floor: np.ndarray
    i_learned: np.ndarray
    i_swpt: np.ndarray

    def excess(self, which: str) -> np.ndarray:
        model_i = self.i_learned if which == MODEL_NAME else self.i_swpt
        return model_i - self.i_floor

    def ratio(self) -> np.ndarray:
        """(I_swpt - I_floor) / (I_learned - I_floor); NaN where the guard trips."""
        num = self.excess(BASELINE_NAME)
        den = self.excess(MODEL_NAME)
        out = np.full_like(num, np.nan)
        ok = den > EXCESS_EPS
        out[ok] = num[ok] / den[ok]
        return out

    def mean_excess(self, which: str) -> float:
        return float(self.excess(which).mean())

    def per_device_mean_excess(self, which: str) -> dict[int, float]:
        ex = self.excess(which)
        return {
            int(d): float(ex[self.device_ids == d].mean())
            for d in np.unique(self.device_ids)
        }


def infidelity_report(
    model: SurrogateModel,
    adapted: dict[int, DeviceParams],
    devices: list[DeviceParams],
    q: QubitConstants,
    frame: FrameConfig,
    grid: np.ndarray,
    qubit_fluxes: tuple[float, float] = (0.25, 0.25),
    t: float = 1.0,
) -> InfidelityReport:
    """I_floor, I_learned, I_swpt per (device, coupler flux) grid point.

    The floor is 1 - F(c_true); both models inherit it, so differences are
    reported as excess above the floor. Grid points with a degenerate
    selection are dropped.
    """
    ids, pcs, geffs, fls, ils, isw = [], [], [], [], [], []
    for idx, eta_true in enumerate(devices):
        eta_pred = adapted[idx]
        for pc in grid:
            phi = ControlFlux(qubit_fluxes[0], qubit_fluxes[1], float(pc))
            try:
                h = build_full_hamiltonian(q, eta_true, phi, frame)
                out = effective_coefficients(h, t)
                c_base = swpt_coefficients(q, eta_true, phi, frame)
            except HamlearnError:
                continue
            c_learned = forward(model, eta_pred, phi)
            ids.append(idx)
            pcs.append(float(pc))
            geffs.append(2.0 * out.c_true.c_xx)
            fls.append(1.0 - out.fidelity_true)
            ils.append(1.0 - process_fidelity(c_learned, out.u_proj, t))
            isw.append(1.0 - process_fidelity(c_base, out.u_proj, t))
    return InfidelityReport(
        device_ids=np.array(ids),
        phi_c1=np.array(pcs),
        g_eff_mhz=np.array(geffs),
        i_floor=np.array(fls),
        i_learned=np.array(ils),
        i_swpt=np.array(isw),
    )


@dataclass
class SweepCurves:
    """Truth / learned / baseline coefficient curves along the coupler flux."""

    phi_c1: np.ndarray
    truth: np.ndarray     # (G, 5) MHz, NaN where the reduction fails
    learned: np.ndarray
    swpt: np.ndarray


def flux_sweep(
    model: SurrogateModel | None,
    eta_pred: DeviceParams | None,
    eta_true: DeviceParams,
    q: QubitConstants,
    frame: FrameConfig,
    grid: np.ndarray,
    qubit_fluxes: tuple[float, float] = (0.25, 0.25),
    t: float = 1.0,
) -> SweepCurves:
    """Coefficient curves on a coupler-flux grid at fixed qubit fluxes."""
    g = len(grid)
    truth = np.full((g, 5), np.nan)
    learned = np.full((g, 5), np.nan)
    base = np.full((g, 5), np.nan)
    for i, pc in enumerate(grid):
        phi = ControlFlux(qubit_fluxes[0], qubit_fluxes[1], float(pc))
        try:
            truth[i] = ground_truth_coefficients(q, eta_true, phi, frame, t).as_array()
        except HamlearnError:
            pass
        try:
            base[i] = swpt_coefficients(q, eta_true, phi, frame).as_array()
        except HamlearnError:
            pass
        if model is not None and eta_pred is not None:
            learned[i] = forward(model, eta_pred, phi).as_array()
    return SweepCurves(phi_c1=np.asarray(grid, dtype=float), truth=truth, learned=learned, swpt=base)


def hybridization_table(
    q: QubitConstants,
    devices: list[DeviceParams],
    phi: ControlFlux,
) -> list[HybridizationReport]:
    return [hybridization_ratios(q, eta, phi) for eta in devices]


# ---------------------------------------------------------------------------
# Plot-ready CSV / summary emitters. Every file starts with a comment line
# carrying the schema tag and the run configuration hash.


def _csv_text(meta_line: str, header: list[str], rows) -> str:
    buf = io.StringIO()
    buf.write(meta_line + "\n")
    writer = csv.writer(buf)
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _meta(tag: str, cfg_hash: str) -> str:
    return f"# hamlearn:{tag} v1 config={cfg_hash}"


def table_csv(report: CoefficientErrorReport, cfg_hash: str) -> str:
    rows = []
    rel_l = report.relative_pct(MODEL_NAME)
    rel_s = report.relative_pct(BASELINE_NAME)
    for k, label in enumerate(COEFF_LABELS):
        rows.append(
            [label, f"{report.mae_learned[k]:.6f}", f"{rel_l[k]:.4f}",
             f"{report.mae_swpt[k]:.6f}", f"{rel_s[k]:.4f}"]
        )
    mae_l, rl = report.all_terms(MODEL_NAME)
    mae_s, rs = report.all_terms(BASELINE_NAME)
    rows.append(["All", f"{mae_l:.6f}", f"{rl:.4f}", f"{mae_s:.6f}", f"{rs:.4f}"])
    return _csv_text(
        _meta("coefficient-mae", cfg_hash),
        ["term", "learned_mae_mhz", "learned_rel_pct", "swpt_mae_mhz", "swpt_rel_pct"],
        rows,
    )


def scatter_csv(report: CoefficientErrorReport, cfg_hash: str) -> str:
    rows = []
    for i in range(report.truth.shape[0]):
        for k, label in enumerate(COEFF_LABELS):
            rows.append(
                [int(report.device_ids[i]), label,
                 repr(report.truth[i, k]), repr(report.learned[i, k]), repr(report.swpt[i, k])]
            )
    return _csv_text(
        _meta("coefficient-scatter", cfg_hash),
        ["device", "term", "truth_mhz", "learned_mhz", "swpt_mhz"],
        rows,
    )


def infidelity_csv(report: InfidelityReport, cfg_hash: str) -> str:
    ratio = report.ratio()
    rows = [
        [int(report.device_ids[i]), repr(report.phi_c1[i]), repr(report.g_eff_mhz[i]),
         repr(report.i_floor[i]), repr(report.i_learned[i]), repr(report.i_swpt[i]),
         "" if np.isnan(ratio[i]) else repr(ratio[i])]
        for i in range(len(report.phi_c1))
    ]
    return _csv_text(
        _meta("excess-infidelity", cfg_hash),
        ["device", "phi_c1", "g_eff_mhz", "i_floor", "i_learned", "i_swpt", "ratio"],
        rows,
    )


def sweep_csv(curves: SweepCurves, device_id: int, cfg_hash: str) -> str:
    rows = []
    for i, pc in enumerate(curves.phi_c1):
        for k, label in enumerate(COEFF_LABELS):
            rows.append(
                [device_id, repr(float(pc)), label,
                 repr(curves.truth[i, k]), repr(curves.learned[i, k]), repr(curves.swpt[i, k])]
            )
    return _csv_text(
        _meta("flux-sweep", cfg_hash),
        ["device", "phi_c1", "term", "truth_mhz", "learned_mhz", "swpt_mhz"],
        rows,
    )


def hybridization_csv(
    reports: list[HybridizationReport], phi: ControlFlux, cfg_hash: str
) -> str:
    rows = [
        [i, repr(r.ratio_q1), repr(r.ratio_q2), repr(r.max_ratio)]
        for i, r in enumerate(reports)
    ]
    return _csv_text(
        _meta(f"hybridization phi_c1={phi.phi_c1}", cfg_hash),
        ["device", "ratio_q1", "ratio_q2", "max_ratio"],
        rows,
    )


def informativeness_csv(sig: SignalMatrix, cfg_hash: str) -> str:
    var = sig.raw_variance
    rows = [
        [p.state_q1, p.state_q2, p.observable, repr(var[i])]
        for i, p in enumerate(sig.pairs)
    ]
    return _csv_text(
        _meta("informativeness", cfg_hash),
        ["state_q1", "state_q2", "observable", "variance"],
        rows,
    )


def greedy_csv(sel: SelectionResult, cfg_hash: str) -> str:
    rows = [
        [rank, p.state_q1, p.state_q2, p.observable,
         repr(float(sel.raw[rank])), repr(float(sel.marginal[rank]))]
        for rank, p in enumerate(sel.pairs)
    ]
    return _csv_text(
        _meta("greedy-selection", cfg_hash),
        ["rank", "state_q1", "state_q2", "observable", "raw", "marginal"],
        rows,
    )


def summary_dict(
    coeff: CoefficientErrorReport | None,
    infid: InfidelityReport | None,
    hybrid: list[HybridizationReport] | None,
    cfg_hash: str,
) -> dict:
    out: dict = {"schema": "hamlearn-summary", "version": 1, "config": cfg_hash}
    if coeff is not None:
        mae_l, rel_l = coeff.all_terms(MODEL_NAME)
        mae_s, rel_s = coeff.all_terms(BASELINE_NAME)
        out["coefficients"] = {
            "per_term": {
                label: {
                    "learned_mae_mhz": float(coeff.mae_learned[k]),
                    "swpt_mae_mhz": float(coeff.mae_swpt[k]),
                    "learned_rel_pct": float(coeff.relative_pct(MODEL_NAME)[k]),
                    "swpt_rel_pct": float(coeff.relative_pct(BASELINE_NAME)[k]),
                }
                for k, label in enumerate(COEFF_LABELS)
            },
            "all_terms": {
                "learned_mae_mhz": mae_l,
                "learned_rel_pct": rel_l,
                "swpt_mae_mhz": mae_s,
                "swpt_rel_pct": rel_s,
            },
            "skipped_points": coeff.skipped_points,
        }
    if infid is not None:
        out["excess_infidelity"] = {
            "learned_mean": infid.mean_excess(MODEL_NAME),
            "swpt_mean": infid.mean_excess(BASELINE_NAME),
            "learned_per_device": infid.per_device_mean_excess(MODEL_NAME),
            "swpt_per_device": infid.per_device_mean_excess(BASELINE_NAME),
        }
    if hybrid is not None:
        out["hybridization_max_ratios"] = [r.max_ratio for r in hybrid]
    return out
