import json
import os
import subprocess
import sys
import textwrap

import numpy as np
import pytest
import scipy.linalg

from hamlearn import kernels


def random_hermitian(rng, n):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return np.ascontiguousarray((a + a.conj().T) / 2.0)


class TestExpm:
    def test_against_scipy(self):
        rng = np.random.default_rng(0)
        for n in (4, 8):
            h = random_hermitian(rng, n)
            ours = kernels.expm_hermitian(h, 0.8)
            assert np.abs(ours - scipy.linalg.expm(-1j * h * 0.8)).max() < 1e-11

    def test_derivatives_match_finite_differences(self):
        rng = np.random.default_rng(1)
        x = rng.uniform(-0.5, 0.5, 5)
        u, du = kernels.u4_and_derivatives(x, 1.0)
        assert np.abs(u - kernels.u4_from_coeffs(x, 1.0)).max() < 1e-14
        h = 1e-6
        for k in range(5):
            xp, xm = x.copy(), x.copy()
            xp[k] += h
            xm[k] -= h
            fd = (kernels.u4_from_coeffs(xp, 1.0) - kernels.u4_from_coeffs(xm, 1.0)) / (2 * h)
            assert np.abs(du[k] - fd).max() < 1e-8


class TestFidelityKernels:
    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(2)
        for _ in range(5):
            x = rng.uniform(-0.5, 0.5, 5)
            u = kernels.u4_from_coeffs(rng.uniform(-0.5, 0.5, 5), 1.0)
            f0, g = kernels.neg_fidelity_and_grad(x, u, 1.0)
            assert f0 == pytest.approx(-kernels.fidelity_value(x, u, 1.0), abs=1e-14)
            h = 1e-7
            for k in range(5):
                xp, xm = x.copy(), x.copy()
                xp[k] += h
                xm[k] -= h
                fd = (
                    kernels.neg_fidelity_and_grad(xp, u, 1.0)[0]
                    - kernels.neg_fidelity_and_grad(xm, u, 1.0)[0]
                ) / (2 * h)
                assert g[k] == pytest.approx(fd, abs=1e-7)

    def test_multi_snapshot_mean(self):
        rng = np.random.default_rng(3)
        x = rng.uniform(-0.5, 0.5, 5)
        ups = np.stack([kernels.u4_from_coeffs(rng.uniform(-0.5, 0.5, 5), t) for t in (0.5, 1.0)])
        ts = np.array([0.5, 1.0])
        f, g = kernels.neg_mean_fidelity_and_grad(x, ups, ts)
        f1, g1 = kernels.neg_fidelity_and_grad(x, ups[0], 0.5)
        f2, g2 = kernels.neg_fidelity_and_grad(x, ups[1], 1.0)
        assert f == pytest.approx((f1 + f2) / 2, abs=1e-14)
        assert np.abs(g - (g1 + g2) / 2).max() < 1e-14


_BACKEND_SCRIPT = textwrap.dedent(
    """
    import json
    import numpy as np
    from hamlearn import kernels
    from hamlearn.physics import (ControlFlux, DeviceParams, FrameConfig,
                                  QubitConstants, build_full_hamiltonian)
    from hamlearn.reduction import effective_coefficients

    h = build_full_hamiltonian(
        QubitConstants(), DeviceParams(25.5, 0.3, 0.02, 0.02, 0.003),
        ControlFlux(0.25, 0.25, 1.1), FrameConfig(),
    )
    out = effective_coefficients(h, 1.0)
    rng = np.random.default_rng(0)
    x = np.ascontiguousarray(rng.normal(size=(40, 8)))
    y = np.ascontiguousarray(rng.normal(size=(40, 5)))
    w = []
    for a, b in ((8, 64), (64, 64), (64, 64), (64, 5)):
        w.append(np.ascontiguousarray(rng.normal(size=(a, b)) / np.sqrt(a)))
        w.append(np.zeros(b))
    loss, *grads = kernels.mlp_loss_and_grads(x, y, *w)
    print(json.dumps({
        "backend": kernels.BACKEND,
        "c_true": out.c_true.as_array().tolist(),
        "fidelity": out.fidelity_true,
        "loss": loss,
        "g0": float(np.abs(grads[0]).sum()),
    }))
    """
)


def _run_with_backend(flag: str) -> dict:
    env = dict(os.environ, HAMLEARN_NUMBA=flag)
    out = subprocess.run(
        [sys.executable, "-c", _BACKEND_SCRIPT], env=env,
        capture_output=True, text=True, check=True,
    )
    return json.loads(out.stdout.strip().splitlines()[-1])


class TestBackends:
    def test_numpy_fallback_flag(self):
        res = _run_with_backend("0")
        assert res["backend"] == "numpy"

    def test_backends_agree(self):
        a = _run_with_backend("0")
        b = _run_with_backend("auto")
        assert np.allclose(a["c_true"], b["c_true"], atol=1e-9)
        assert a["fidelity"] == pytest.approx(b["fidelity"], abs=1e-12)
        assert a["loss"] == pytest.approx(b["loss"], rel=1e-12)
        assert a["g0"] == pytest.approx(b["g0"], rel=1e-10)

    def test_current_backend_reported(self):
        assert kernels.BACKEND in ("numba", "numpy")
        assert kernels.NUMBA_ENABLED == (kernels.BACKEND == "numba")


class TestHamiltonianAssembly:
    def test_flip_flop_structure(self):
        deltas = np.array([0.5, -0.3, 2.0])
        gs = np.array([0.11, 0.07, 0.005])
        h = kernels.build_coupled_h8(deltas, gs)
        assert np.abs(h - h.conj().T).max() == 0.0
        # |100> <-> <001|: q1-c1 flip-flop element
        assert h[4, 1] == pytest.approx(gs[0])
        # |010> <-> <001|: q2-c1
        assert h[2, 1] == pytest.approx(gs[1])
        # |100> <-> <010|: q1-q2
        assert h[4, 2] == pytest.approx(gs[2])
        # diagonal: excited modes contribute +delta/2
        assert h[0, 0] == pytest.approx(-(deltas.sum()) / 2)
        assert h[7, 7] == pytest.approx(deltas.sum() / 2)
        # excitation-number conservation: no coupling between 0- and 2-excitation states
        assert h[0, 3] == 0.0 and h[0, 7] == 0.0
