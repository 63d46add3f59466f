#!/usr/bin/env python3
"""Benchmark the JIT-compiled kernels against the pure-numpy fallback.

The kernel backend is fixed at import time by HAMLEARN_NUMBA, so this
driver re-executes itself in two subprocesses (one per backend) and prints
a side-by-side table. Run from the repository root:

    python3 benchmarks/bench_kernels.py [--repeats N]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time


def run_benchmarks(repeats: int) -> dict:
    import numpy as np

    from hamlearn import kernels
    from hamlearn.adaptation import pair_tables, synthesize_measurements
    from hamlearn.dataset import EnsembleSpec, make_record, sample_ensemble, sample_pulses
    from hamlearn.design import fps_select_fluxes
    from hamlearn.operators import OBSERVABLES, PRODUCT_STATE_COLUMNS
    from hamlearn.physics import MHZ_TO_RADNS, FrameConfig, QubitConstants
    from hamlearn.selfcheck import _CHECK_PAIRS
    from hamlearn.surrogate import init_model

    q = QubitConstants()
    frame = FrameConfig()
    spec = EnsembleSpec(seed=0)
    devices = sample_ensemble(spec, 10)
    pulses = sample_pulses(spec, 10)

    results = {"backend": kernels.BACKEND}

    def timeit(name, fn, n):
        fn()  # warm-up (and JIT compile on the numba path)
        t0 = time.perf_counter()
        for _ in range(repeats):
            fn()
        per = (time.perf_counter() - t0) / repeats / n
        results[name] = per
        return per

    # 1. full reduction records (dataset generation inner loop)
    cases = [(eta, phi) for eta in devices for phi in pulses]

    def reduce_all():
        for eta, phi in cases:
            make_record(q, eta, phi, frame, 1.0)

    timeit("reduction_record", reduce_all, len(cases))

    # 2. adaptation loss+gradient evaluation (surrogate path)
    model = init_model(0)
    fluxes = fps_select_fluxes(sample_pulses(spec, 200), 20)
    meas = synthesize_measurements(q, devices[0], fluxes, _CHECK_PAIRS, frame, 1.0)
    states, obs = pair_tables(_CHECK_PAIRS)
    phis = np.ascontiguousarray(np.stack([f.as_array() for f in fluxes]))
    eta0 = devices[0].as_array()
    w = model.weight_tuple()

    def adapt_eval():
        kernels.adapt_loss_and_grad(
            eta0, phis, meas.values, *w, model.input_mean, model.input_std,
            states, obs, 1.0,
        )

    timeit("adapt_loss_grad", adapt_eval, 1)

    # 3. signal-matrix expectations (540 candidates per draw)
    rng = np.random.default_rng(1)
    coeffs = rng.uniform(-40, 60, size=(50, 5))

    def signals():
        for c in coeffs:
            u4 = kernels.u4_from_coeffs(c * MHZ_TO_RADNS, 1.0)
            kernels.signal_expectations(u4, PRODUCT_STATE_COLUMNS, OBSERVABLES)

    timeit("signal_draw", signals, len(coeffs))

    # 4. full-batch training epoch (5000 x 8 -> 5)
    x = np.ascontiguousarray(rng.normal(size=(5000, 8)))
    y = np.ascontiguousarray(rng.normal(size=(5000, 5)))

    def epoch():
        kernels.mlp_loss_and_grads(x, y, *w)

    timeit("train_epoch", epoch, 1)

    return results


LABELS = {
    "reduction_record": ("reduction pipeline, per record", 1e3, "ms"),
    "adapt_loss_grad": ("adaptation loss+grad, per eval (20x7)", 1e3, "ms"),
    "signal_draw": ("signal matrix, per draw (540 pairs)", 1e3, "ms"),
    "train_epoch": ("training epoch (5000 records)", 1e3, "ms"),
}


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args()

    if args.worker:
        print(json.dumps(run_benchmarks(args.repeats)))
        return 0

    rows = {}
    for flag in ("1", "0"):
        env = dict(os.environ, HAMLEARN_NUMBA=flag)
        out = subprocess.run(
            [sys.executable, __file__, "--worker", "--repeats", str(args.repeats)],
            env=env, capture_output=True, text=True,
        )
        if out.returncode != 0:
            print(out.stderr, file=sys.stderr)
            return 1
        res = json.loads(out.stdout.strip().splitlines()[-1])
        rows[res.pop("backend")] = res

    print(f"{'kernel':45s} {'numba':>12s} {'numpy':>12s} {'speedup':>9s}")
    for key, (label, scale, unit) in LABELS.items():
        nb = rows["numba"][key] * scale
        np_ = rows["numpy"][key] * scale
        print(f"{label:45s} {nb:10.3f}{unit} {np_:10.3f}{unit} {np_/nb:8.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
