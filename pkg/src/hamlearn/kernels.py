"""Hot numeric kernels, JIT-compiled with numba when available.

Every kernel is written as plain numpy so the module works without a
compiler. At import time each function is wrapped with ``numba.njit``
unless the environment variable ``HAMLEARN_NUMBA`` disables it:

* ``HAMLEARN_NUMBA=auto`` (default): JIT if numba imports, else fall back.
* ``HAMLEARN_NUMBA=1``: require numba, fail loudly if missing.
* ``HAMLEARN_NUMBA=0``: force the pure-numpy fallback.

``benchmarks/bench_kernels.py`` times the two paths against each other.

Units inside kernels: Hamiltonian entries and coefficient 5-vectors are in
angular frequency (rad/ns); times in ns. Conversions to/from MHz happen in
the calling modules.
"""

from __future__ import annotations

import os

import numpy as np

from .operators import PAULI_BASIS, QUBIT_SUBSPACE


def _resolve_backend() -> bool:
    flag = os.environ.get("HAMLEARN_NUMBA", "auto").strip().lower()
    if flag in ("0", "off", "false", "no"):
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        if flag in ("1", "on", "true", "yes"):
            raise RuntimeError(
                "HAMLEARN_NUMBA=1 requested but numba is not importable"
            )
        return False
    return True


NUMBA_ENABLED = _resolve_backend()
BACKEND = "numba" if NUMBA_ENABLED else "numpy"

if NUMBA_ENABLED:
    from numba import njit as _njit

    def _jit(fn):
        return _njit(cache=True)(fn)

else:

    def _jit(fn):
        return fn


_PAULI = PAULI_BASIS  # (5, 4, 4) complex128, module-level constant for the JIT
_QSUB = QUBIT_SUBSPACE  # indices {0, 2, 4, 6}

# Bit layout of the 8-dim basis: q1 -> bit 2, q2 -> bit 1, c1 -> bit 0.
_PAIR_MASKS = np.array([5, 3, 6], dtype=np.int64)  # (q1,c1), (q2,c1), (q1,q2)
_PAIR_BITS = np.array([[2, 0], [1, 0], [2, 1]], dtype=np.int64)


@_jit
def build_coupled_h8(deltas, gs):
    """Three-mode RWA Hamiltonian (rad/ns).

    deltas: per-mode frame detunings (q1, q2, c1); gs: flip-flop rates in
    pair order (q1-c1, q2-c1, q1-q2). Diagonal carries +delta/2 per excited
    bit (Z has the excited state as +1 eigenstate).
    """
    h = np.zeros((8, 8), dtype=np.complex128)
    for b in range(8):
        d = 0.0
        d += 0.5 * deltas[0] * (2.0 * ((b >> 2) & 1) - 1.0)
        d += 0.5 * deltas[1] * (2.0 * ((b >> 1) & 1) - 1.0)
        d += 0.5 * deltas[2] * (2.0 * (b & 1) - 1.0)
        h[b, b] = d
        for p in range(3):
            bj = (b >> _PAIR_BITS[p, 0]) & 1
            bk = (b >> _PAIR_BITS[p, 1]) & 1
            if bj != bk:
                h[b ^ _PAIR_MASKS[p], b] += gs[p]
    return h


@_jit
def expm_hermitian(h, t):
    """exp(-i h t) through the Hermitian eigendecomposition."""
    evals, evecs = np.linalg.eigh(h)
    phase = np.exp(-1j * t * evals)
    return (evecs * phase) @ np.conj(evecs).T


@_jit
def propagator_from_eigh(evals, evecs, t):
    phase = np.exp(-1j * t * evals)
    return (evecs * phase) @ np.conj(evecs).T


@_jit
def dressed_core(h8):
    """Eigendecompose, select the four most qubit-like states, orthonormalize.

    Returns (evals8, evecs8, weights8, selected4, tie_gap, gram_min,
    energies4, overlap M, orthonormalized Mt, h_dress). ``tie_gap`` is the
    margin between the 4th and 5th largest weights; ``gram_min`` the
    smallest Gram-matrix eigenvalue. The caller turns either into an error.
    """
    evals, evecs = np.linalg.eigh(h8)
    w = np.zeros(8)
    for k in range(8):
        acc = 0.0
        for i in range(4):
            q = _QSUB[i]
            acc += evecs[q, k].real ** 2 + evecs[q, k].imag ** 2
        w[k] = acc
    order = np.argsort(-w)
    tie_gap = w[order[3]] - w[order[4]]
    sel = np.sort(order[:4])  # eigh gives ascending energies, so index order = energy order
    energies = np.empty(4)
    m = np.empty((4, 4), dtype=np.complex128)
    for a in range(4):
        energies[a] = evals[sel[a]]
        for i in range(4):
            m[i, a] = evecs[_QSUB[i], sel[a]]
    s = np.conj(m).T @ m
    lam, v = np.linalg.eigh(s)
    gram_min = lam[0]
    lam_isqrt = np.abs(lam) ** -0.5
    s_isqrt = (v * lam_isqrt.astype(np.complex128)) @ np.conj(v).T
    mt = m @ s_isqrt
    hd = (mt * energies.astype(np.complex128)) @ np.conj(mt).T
    hd = (hd + np.conj(hd).T) / 2.0
    return evals, evecs, w, sel, tie_gap, gram_min, energies, m, mt, hd


@_jit
def lowdin_dress(m, energies):
    """H_dress from an overlap matrix and its eigenenergies (Lowdin step only)."""
    s = np.conj(m).T @ m
    lam, v = np.linalg.eigh(s)
    lam_isqrt = np.abs(lam) ** -0.5
    s_isqrt = (v * lam_isqrt.astype(np.complex128)) @ np.conj(v).T
    mt = m @ s_isqrt
    hd = (mt * energies.astype(np.complex128)) @ np.conj(mt).T
    return (hd + np.conj(hd).T) / 2.0


@_jit
def subunitary_from_eigh(evals, evecs, t):
    """Qubit-subspace block of exp(-i H t) from a precomputed eigensystem."""
    phase = np.exp(-1j * t * evals)
    u8 = (evecs * phase) @ np.conj(evecs).T
    u4 = np.empty((4, 4), dtype=np.complex128)
    for i in range(4):
        for j in range(4):
            u4[i, j] = u8[_QSUB[i], _QSUB[j]]
    return u4


@_jit
def pauli_coeffs_radns(h4):
    """Project a 4x4 Hermitian onto the five-operator basis.

    Returns (c, residual): c in rad/ns, residual the Frobenius norm of the
    traceless part outside span{ZI, IZ, XX, YY, ZZ}.
    """
    c = np.zeros(5)
    for k in range(5):
        acc = 0.0
        for i in range(4):
            for j in range(4):
                acc += (_PAULI[k, i, j] * h4[j, i]).real
        c[k] = acc / 4.0
    tr = 0.0
    for i in range(4):
        tr += h4[i, i].real
    rec = np.zeros((4, 4), dtype=np.complex128)
    for k in range(5):
        rec += c[k] * _PAULI[k]
    for i in range(4):
        rec[i, i] += tr / 4.0
    resid = 0.0
    for i in range(4):
        for j in range(4):
            d = h4[i, j] - rec[i, j]
            resid += d.real ** 2 + d.imag ** 2
    return c, np.sqrt(resid)


@_jit
def h4_from_coeffs(x):
    """Effective Hamiltonian (rad/ns) from a coefficient 5-vector (rad/ns)."""
    h = np.zeros((4, 4), dtype=np.complex128)
    for k in range(5):
        h += x[k] * _PAULI[k]
    return h


@_jit
def u4_from_coeffs(x, t):
    return expm_hermitian(h4_from_coeffs(x), t)


@_jit
def fidelity_value(x, u_proj, t):
    """Process fidelity |Tr(exp(+i H(x) t) U_proj)|^2 / 16."""
    h = h4_from_coeffs(x)
    lam, v = np.linalg.eigh(h)
    ex = np.exp(1j * t * lam)
    a = (v * ex) @ np.conj(v).T
    g = 0.0 + 0.0j
    for i in range(4):
        for j in range(4):
            g += a[i, j] * u_proj[j, i]
    return (g.real ** 2 + g.imag ** 2) / 16.0


@_jit
def neg_fidelity_and_grad(x, u_proj, t):
    """(-F, -dF/dx) for the process-fidelity objective, x in rad/ns.

    The gradient uses the Daleckii-Krein divided-difference form of the
    matrix-exponential derivative; the off-diagonal entries are computed as
    exp(i t (a+b)/2) * 2i sin(t (a-b)/2) / (a-b), which is cancellation-free.
    """
    h = h4_from_coeffs(x)
    lam, v = np.linalg.eigh(h)
    ex = np.exp(1j * t * lam)
    a = (v * ex) @ np.conj(v).T
    g = 0.0 + 0.0j
    for i in range(4):
        for j in range(4):
            g += a[i, j] * u_proj[j, i]
    f = (g.real ** 2 + g.imag ** 2) / 16.0

    vh = np.conj(v).T
    w = vh @ u_proj @ v
    f1 = np.empty((4, 4), dtype=np.complex128)
    for i in range(4):
        for j in range(4):
            d = lam[i] - lam[j]
            mid = np.exp(1j * t * 0.5 * (lam[i] + lam[j]))
            if abs(d) < 1e-14:
                f1[i, j] = 1j * t * mid
            else:
                f1[i, j] = mid * 2j * np.sin(0.5 * t * d) / d
    grad = np.zeros(5)
    for k in range(5):
        b = vh @ _PAULI[k] @ v
        dg = 0.0 + 0.0j
        for i in range(4):
            for j in range(4):
                dg += f1[i, j] * b[i, j] * w[j, i]
        grad[k] = (np.conj(g) * dg).real / 8.0
    return -f, -grad


@_jit
def neg_mean_fidelity_and_grad(x, u_projs, ts):
    """Multi-snapshot variant: mean fidelity over (U_proj(t_s), t_s) pairs."""
    n = ts.shape[0]
    total = 0.0
    grad = np.zeros(5)
    for s in range(n):
        fs, gs = neg_fidelity_and_grad(x, u_projs[s], ts[s])
        total += fs
        grad += gs
    return total / n, grad / n


@_jit
def u4_and_derivatives(x, t):
    """exp(-i H(x) t) and its five partial derivatives w.r.t. x (rad/ns)."""
    h = h4_from_coeffs(x)
    lam, v = np.linalg.eigh(h)
    ex = np.exp(-1j * t * lam)
    u = (v * ex) @ np.conj(v).T
    vh = np.conj(v).T
    f1 = np.empty((4, 4), dtype=np.complex128)
    for i in range(4):
        for j in range(4):
            d = lam[i] - lam[j]
            mid = np.exp(-1j * t * 0.5 * (lam[i] + lam[j]))
            if abs(d) < 1e-14:
                f1[i, j] = -1j * t * mid
            else:
                f1[i, j] = mid * (-2j) * np.sin(0.5 * t * d) / d
    du = np.empty((5, 4, 4), dtype=np.complex128)
    for k in range(5):
        b = vh @ _PAULI[k] @ v
        du[k] = v @ (f1 * b) @ vh
    return u, du


@_jit
def signal_expectations(u4, state_columns, observables):
    """Expectations of every (state, observable) candidate under u4.

    state_columns: (4, S) product states; observables: (P, 4, 4).
    Output is state-major: out[s * P + p].
    """
    ns = state_columns.shape[1]
    no = observables.shape[0]
    evolved = u4 @ state_columns
    out = np.empty(ns * no)
    for p in range(no):
        act = observables[p] @ evolved
        for s in range(ns):
            acc = 0.0
            for i in range(4):
                acc += (np.conj(evolved[i, s]) * act[i, s]).real
            out[s * no + p] = acc
    return out


@_jit
def pair_expectations(u4, states, observables):
    """One expectation per pair; states (4, P) pairs with observables (P, 4, 4)."""
    n = states.shape[1]
    out = np.empty(n)
    evolved = u4 @ states
    for p in range(n):
        acc = 0.0
        col = evolved[:, p].copy()
        vec = observables[p] @ col
        for i in range(4):
            acc += (np.conj(col[i]) * vec[i]).real
        out[p] = acc
    return out


# ---------------------------------------------------------------------------
# Surrogate network kernels (full-batch MLP, SiLU hidden activations).


@_jit
def mlp_forward_batch(x, w1, b1, w2, b2, w3, b3, w4, b4):
    z1 = x @ w1 + b1
    a1 = z1 / (1.0 + np.exp(-z1))
    z2 = a1 @ w2 + b2
    a2 = z2 / (1.0 + np.exp(-z2))
    z3 = a2 @ w3 + b3
    a3 = z3 / (1.0 + np.exp(-z3))
    return a3 @ w4 + b4


@_jit
def mlp_loss_and_grads(x, y, w1, b1, w2, b2, w3, b3, w4, b4):
    """Summed squared error and gradients for the full batch."""
    z1 = x @ w1 + b1
    s1 = 1.0 / (1.0 + np.exp(-z1))
    a1 = z1 * s1
    z2 = a1 @ w2 + b2
    s2 = 1.0 / (1.0 + np.exp(-z2))
    a2 = z2 * s2
    z3 = a2 @ w3 + b3
    s3 = 1.0 / (1.0 + np.exp(-z3))
    a3 = z3 * s3
    pred = a3 @ w4 + b4

    r = pred - y
    loss = np.sum(r * r)
    dp = 2.0 * r
    dw4 = a3.T @ dp
    db4 = np.sum(dp, axis=0)
    da3 = dp @ w4.T
    dz3 = da3 * (s3 * (1.0 + z3 * (1.0 - s3)))
    dw3 = a2.T @ dz3
    db3 = np.sum(dz3, axis=0)
    da2 = dz3 @ w3.T
    dz2 = da2 * (s2 * (1.0 + z2 * (1.0 - s2)))
    dw2 = a1.T @ dz2
    db2 = np.sum(dz2, axis=0)
    da1 = dz2 @ w2.T
    dz1 = da1 * (s1 * (1.0 + z1 * (1.0 - s1)))
    dw1 = x.T @ dz1
    db1 = np.sum(dz1, axis=0)
    return loss, dw1, db1, dw2, db2, dw3, db3, dw4, db4


@_jit
def mlp_single_with_jacobian(xn, w1, b1, w2, b2, w3, b3, w4, b4):
    """Outputs and d(output)/d(input) for one normalized input vector."""
    z1 = xn @ w1 + b1
    s1 = 1.0 / (1.0 + np.exp(-z1))
    a1 = z1 * s1
    z2 = a1 @ w2 + b2
    s2 = 1.0 / (1.0 + np.exp(-z2))
    a2 = z2 * s2
    z3 = a2 @ w3 + b3
    s3 = 1.0 / (1.0 + np.exp(-z3))
    a3 = z3 * s3
    y = a3 @ w4 + b4
    d3 = s3 * (1.0 + z3 * (1.0 - s3))
    d2 = s2 * (1.0 + z2 * (1.0 - s2))
    d1 = s1 * (1.0 + z1 * (1.0 - s1))
    g = w4.T.copy()
    g = (g * d3) @ w3.T
    g = (g * d2) @ w2.T
    g = (g * d1) @ w1.T
    return y, g


_MHZ_TO_RADNS = 2.0e-3 * np.pi


@_jit
def adapt_loss_and_grad(
    eta,
    phis,
    meas,
    w1, b1, w2, b2, w3, b3, w4, b4,
    mu, sd,
    states,
    observables,
    t,
):
    """Sum-of-squared-residual adaptation loss and its eta gradient.

    eta: candidate device parameters (5, GHz); phis: (F, 3) control points;
    meas: (F, P) target expectations; states (4, P) / observables (P, 4, 4)
    describe the selected measurement pairs. The network maps normalized
    (phi, eta) to coefficients in MHz.
    """
    nf = phis.shape[0]
    npair = states.shape[1]
    loss = 0.0
    grad = np.zeros(5)
    x = np.empty(8)
    for j in range(nf):
        for i in range(3):
            x[i] = phis[j, i]
        for i in range(5):
            x[3 + i] = eta[i]
        xn = (x - mu) / sd
        c, jac_n = mlp_single_with_jacobian(xn, w1, b1, w2, b2, w3, b3, w4, b4)
        u, du = u4_and_derivatives(c * _MHZ_TO_RADNS, t)
        dloss_dc = np.zeros(5)
        for p in range(npair):
            psi0 = states[:, p].copy()
            psit = u @ psi0
            opsit = observables[p] @ psit
            e = 0.0
            for i in range(4):
                e += (np.conj(psit[i]) * opsit[i]).real
            r = e - meas[j, p]
            loss += r * r
            for k in range(5):
                dpsi = du[k] @ psi0
                de = 0.0
                for i in range(4):
                    de += (np.conj(dpsi[i]) * opsit[i]).real
                dloss_dc[k] += 2.0 * r * 2.0 * de * _MHZ_TO_RADNS
        for m in range(5):
            acc = 0.0
            for k in range(5):
                acc += dloss_dc[k] * jac_n[k, 3 + m] / sd[3 + m]
            grad[m] += acc
    return loss, grad
