"""Command-line pipeline driver.

Subcommands: gen-data, train, select, adapt, swpt-baseline, evaluate,
sweep, selfcheck. Each reads an optional YAML config (see
config.example.yaml) overridable by flags, writes outputs atomically under
the results directory, and embeds the config hash in every artifact.

Exit codes: 0 success, 1 usage or configuration error, 2 pipeline failure,
3 selfcheck failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, evaluation
from .adaptation import adapt, load_adapt_results, save_adapt_results, synthesize_measurements
from .config import RunConfig, load_config
from .dataset import generate_dataset, load_dataset, persist_dataset, sample_ensemble
from .design import (
    fps_select_fluxes,
    greedy_select,
    informativeness_signals,
    load_selection,
    save_selection,
)
from .errors import ConfigError, HamlearnError
from .persist import atomic_write_text, canonical_json
from .physics import ControlFlux, DeviceParams
from .surrogate import init_model, load_checkpoint, save_checkpoint, train, verify_metadata

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PIPELINE = 2
EXIT_SELFCHECK = 3


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; the documented contract is 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit_usage(message)


class SystemExit_usage(Exception):
    pass


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _require(path: Path, what: str) -> Path:
    if not path.exists():
        raise ConfigError(f"{what} not found at {path}; run the earlier stage first")
    return path


def _heldout_devices(cfg: RunConfig) -> list[DeviceParams]:
    return sample_ensemble(cfg.heldout_spec(), cfg.counts.heldout_devices)


def cmd_gen_data(cfg: RunConfig, args) -> int:
    devices = sample_ensemble(cfg.ensemble, cfg.counts.train_devices)
    t0 = time.perf_counter()
    ds = generate_dataset(
        cfg.qubit, devices, cfg.counts.pulses_per_device, cfg.frame, cfg.t,
        cfg.ensemble, workers=cfg.workers,
    )
    dt = time.perf_counter() - t0
    persist_dataset(ds, cfg.path("dataset"), extra_header={"config": cfg.hash()})
    n_flagged = sum(1 for r in ds.records if not r.usable)
    _log(
        f"gen-data: {len(ds.records)} records ({n_flagged} flagged) in {dt:.1f}s "
        f"-> {cfg.path('dataset')}"
    )
    return EXIT_OK


def cmd_train(cfg: RunConfig, args) -> int:
    ds = load_dataset(_require(cfg.path("dataset"), "dataset"))
    model = init_model(cfg.seeds.train)
    metadata = {
        "frame": {"omega0": ds.frame.omega0},
        "ensemble": ds.spec.as_dict(),
        "t": ds.t,
        "config": cfg.hash(),
    }
    t0 = time.perf_counter()
    model, history = train(model, ds.usable_records(), cfg.train, metadata=metadata)
    dt = time.perf_counter() - t0
    save_checkpoint(model, cfg.path("checkpoint"))
    buf = io.StringIO()
    buf.write(f"# hamlearn:train-history v1 config={cfg.hash()}\n")
    w = csv.writer(buf)
    w.writerow(["epoch", "loss_mhz2", "learning_rate"])
    for i, (loss, lr) in enumerate(zip(history.losses, history.learning_rates)):
        w.writerow([i, repr(float(loss)), repr(float(lr))])
    atomic_write_text(cfg.path("history"), buf.getvalue())
    _log(
        f"train: {len(history.losses)} epochs in {dt:.0f}s, best loss "
        f"{history.best_loss:.6e} MHz^2 at epoch {history.best_epoch} "
        f"({history.stop_reason}) -> {cfg.path('checkpoint')}"
    )
    return EXIT_OK


def cmd_select(cfg: RunConfig, args) -> int:
    model = load_checkpoint(_require(cfg.path("checkpoint"), "checkpoint"))
    verify_metadata(model, frame=cfg.frame)
    ds = load_dataset(_require(cfg.path("dataset"), "dataset"))
    sig = informativeness_signals(
        model, cfg.ensemble, n_draws=cfg.design.n_draws, t=cfg.t, seed=cfg.seeds.design
    )
    sel = greedy_select(sig, cfg.design.n_pairs)
    pool = [r.phi for r in ds.records]
    fluxes = fps_select_fluxes(pool, cfg.design.n_fluxes)
    save_selection(sel, fluxes, cfg.path("selection"), extra_header={"config": cfg.hash()})
    atomic_write_text(cfg.path("informativeness"), evaluation.informativeness_csv(sig, cfg.hash()))
    atomic_write_text(cfg.path("greedy"), evaluation.greedy_csv(sel, cfg.hash()))
    picked = ", ".join(p.label() for p in sel.pairs)
    _log(f"select: {cfg.design.n_pairs} pairs [{picked}], {cfg.design.n_fluxes} fluxes "
         f"-> {cfg.path('selection')}")
    return EXIT_OK


def cmd_adapt(cfg: RunConfig, args) -> int:
    model = load_checkpoint(_require(cfg.path("checkpoint"), "checkpoint"))
    verify_metadata(model, frame=cfg.frame)
    pairs, fluxes, _ = load_selection(_require(cfg.path("selection"), "selection"))
    devices = _heldout_devices(cfg)
    acfg = cfg.adapt_config()
    results = {}
    for idx, eta_true in enumerate(devices):
        meas = synthesize_measurements(cfg.qubit, eta_true, fluxes, pairs, cfg.frame, cfg.t)
        res = adapt(model, meas, acfg)
        results[idx] = res
        _log(
            f"adapt: device {idx}: best loss {res.best_loss:.3e} "
            f"(restart {res.best_restart}) in {res.wall_time_s:.1f}s"
        )
    save_adapt_results(results, cfg.path("adapt"), extra_header={"config": cfg.hash()})
    return EXIT_OK


def cmd_swpt_baseline(cfg: RunConfig, args) -> int:
    devices = _heldout_devices(cfg)
    phi_h = ControlFlux(
        cfg.evaluation.hybridization_phi_q,
        cfg.evaluation.hybridization_phi_q,
        cfg.evaluation.hybridization_phi_c1,
    )
    reports = evaluation.hybridization_table(cfg.qubit, devices, phi_h)
    atomic_write_text(
        cfg.path("hybridization"), evaluation.hybridization_csv(reports, phi_h, cfg.hash())
    )
    grid = np.linspace(0.1, 1.35, cfg.counts.sweep_points)
    parts = []
    for idx, eta in enumerate(devices):
        curves = evaluation.flux_sweep(
            None, None, eta, cfg.qubit, cfg.frame, grid,
            qubit_fluxes=(cfg.evaluation.sweep_phi_q, cfg.evaluation.sweep_phi_q), t=cfg.t,
        )
        parts.append(evaluation.sweep_csv(curves, idx, cfg.hash()))
    # keep one header line; the per-device bodies follow it
    merged = parts[0] + "".join("\n".join(p.splitlines()[2:]) + "\n" for p in parts[1:])
    atomic_write_text(cfg.path("swpt_sweep"), merged)
    ratios = ", ".join(f"{r.max_ratio:.3f}" for r in reports)
    _log(f"swpt-baseline: per-device max hybridization ratios [{ratios}]")
    return EXIT_OK


def cmd_evaluate(cfg: RunConfig, args) -> int:
    model = load_checkpoint(_require(cfg.path("checkpoint"), "checkpoint"))
    verify_metadata(model, frame=cfg.frame)
    adapted_raw = load_adapt_results(_require(cfg.path("adapt"), "adaptation results"))
    devices = _heldout_devices(cfg)
    if set(adapted_raw) != set(range(len(devices))):
        raise ConfigError(
            "adaptation results do not cover the held-out devices; re-run adapt"
        )
    adapted = {i: DeviceParams.from_array(adapted_raw[i]["eta_pred"]) for i in adapted_raw}

    coeff = evaluation.coefficient_error_report(
        model, adapted, devices, cfg.qubit, cfg.frame, cfg.ensemble,
        n_points=cfg.counts.eval_points, t=cfg.t, seed=cfg.seeds.eval,
    )
    grid = np.linspace(0.1, 1.35, cfg.counts.infidelity_points)
    infid = evaluation.infidelity_report(
        model, adapted, devices, cfg.qubit, cfg.frame, grid,
        qubit_fluxes=(cfg.evaluation.sweep_phi_q, cfg.evaluation.sweep_phi_q), t=cfg.t,
    )
    phi_h = ControlFlux(
        cfg.evaluation.hybridization_phi_q,
        cfg.evaluation.hybridization_phi_q,
        cfg.evaluation.hybridization_phi_c1,
    )
    hybrid = evaluation.hybridization_table(cfg.qubit, devices, phi_h)

    h = cfg.hash()
    atomic_write_text(cfg.path("table"), evaluation.table_csv(coeff, h))
    atomic_write_text(cfg.path("scatter"), evaluation.scatter_csv(coeff, h))
    atomic_write_text(cfg.path("infidelity"), evaluation.infidelity_csv(infid, h))
    atomic_write_text(cfg.path("hybridization"), evaluation.hybridization_csv(hybrid, phi_h, h))
    summary = evaluation.summary_dict(coeff, infid, hybrid, h)
    atomic_write_text(cfg.path("summary"), canonical_json(summary) + "\n")

    mae_l, rel_l = coeff.all_terms(evaluation.MODEL_NAME)
    mae_s, rel_s = coeff.all_terms(evaluation.BASELINE_NAME)
    _log(
        f"evaluate: all-terms MAE learned {mae_l:.3f} MHz ({rel_l:.2f}%) vs "
        f"swpt {mae_s:.3f} MHz ({rel_s:.2f}%); mean excess infidelity "
        f"{infid.mean_excess('learned'):.2e} vs {infid.mean_excess('swpt'):.2e}"
    )
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, args) -> int:
    model = load_checkpoint(_require(cfg.path("checkpoint"), "checkpoint"))
    verify_metadata(model, frame=cfg.frame)
    adapted_raw = load_adapt_results(_require(cfg.path("adapt"), "adaptation results"))
    devices = _heldout_devices(cfg)
    idx = args.device
    if idx not in adapted_raw or idx >= len(devices):
        raise ConfigError(f"device index {idx} has no adaptation result")
    eta_pred = DeviceParams.from_array(adapted_raw[idx]["eta_pred"])
    grid = np.linspace(0.1, 1.35, cfg.counts.sweep_points)
    curves = evaluation.flux_sweep(
        model, eta_pred, devices[idx], cfg.qubit, cfg.frame, grid,
        qubit_fluxes=(cfg.evaluation.sweep_phi_q, cfg.evaluation.sweep_phi_q), t=cfg.t,
    )
    atomic_write_text(cfg.path("sweep"), evaluation.sweep_csv(curves, idx, cfg.hash()))
    _log(f"sweep: device {idx}, {cfg.counts.sweep_points} points -> {cfg.path('sweep')}")
    return EXIT_OK


def cmd_selfcheck(cfg: RunConfig, args) -> int:
    from .selfcheck import run_selfcheck

    ok = run_selfcheck(log=print)
    return EXIT_OK if ok else EXIT_SELFCHECK


_COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "select": cmd_select,
    "adapt": cmd_adapt,
    "swpt-baseline": cmd_swpt_baseline,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "selfcheck": cmd_selfcheck,
}

_OVERRIDE_FLAGS = {
    "results_dir": "results_dir",
    "devices": "counts.train_devices",
    "pulses": "counts.pulses_per_device",
    "heldout": "counts.heldout_devices",
    "eval_points": "counts.eval_points",
    "epochs": "train.max_epochs",
    "train_seed": "seeds.train",
    "heldout_seed": "seeds.heldout",
    "dataset_seed": "ensemble.seed",
    "workers": "workers",
    "restarts": "adapt.restarts",
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hamlearn", description=__doc__)
    parser.add_argument("--version", action="version", version=f"hamlearn {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=str, default=None, help="YAML config file")
        p.add_argument("--results-dir", dest="results_dir", type=str, default=None)
        p.add_argument("--devices", type=int, default=None, help="training devices")
        p.add_argument("--pulses", type=int, default=None, help="pulses per device")
        p.add_argument("--heldout", type=int, default=None, help="held-out devices")
        p.add_argument("--eval-points", dest="eval_points", type=int, default=None)
        p.add_argument("--epochs", type=int, default=None, help="max training epochs")
        p.add_argument("--train-seed", dest="train_seed", type=int, default=None)
        p.add_argument("--heldout-seed", dest="heldout_seed", type=int, default=None)
        p.add_argument("--dataset-seed", dest="dataset_seed", type=int, default=None)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--restarts", type=int, default=None, help="adaptation restarts")
        if name == "sweep":
            p.add_argument("--device", type=int, default=0, help="held-out device index")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit_usage as exc:
        _log(f"error: {exc}")
        return EXIT_CONFIG
    overrides = {
        dotted: getattr(args, flag)
        for flag, dotted in _OVERRIDE_FLAGS.items()
        if getattr(args, flag, None) is not None
    }
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        _log(f"config error: {exc}")
        return EXIT_CONFIG
    try:
        return _COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        _log(f"config error: {exc}")
        return EXIT_CONFIG
    except HamlearnError as exc:
        _log(f"pipeline error: {exc}")
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
