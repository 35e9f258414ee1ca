"""Hot numeric kernels with numba-jitted and pure-numpy implementations.

Every kernel exists in two interchangeable variants that take the same
arguments and return the same values (up to float reduction order):

* ``*_numpy``  -- vectorized numpy, always available
* ``*_loops``  -- loop form, compiled with ``numba.njit`` when possible

The module-level names (``power_samples`` etc.) point at the jitted
variant when numba is importable, otherwise at the numpy one.  Setting
the environment variable ``BEAMNULL_NO_NUMBA=1`` before import forces
the numpy path.  All randomness is drawn by callers with numpy
generators and passed in as arrays, so both paths consume identical
random streams.
"""

from __future__ import annotations

import os

import numpy as np

_FORCE_NUMPY = os.environ.get("BEAMNULL_NO_NUMBA", "0") not in ("", "0")

try:
    if _FORCE_NUMPY:
        raise ImportError("numba disabled via BEAMNULL_NO_NUMBA")
    from numba import njit

    NUMBA_ENABLED = True
except ImportError:
    NUMBA_ENABLED = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


# ---------------------------------------------------------------------------
# received-power sampling
# ---------------------------------------------------------------------------

def power_samples_numpy(g: np.ndarray, phases: np.ndarray) -> np.ndarray:
    """Powers |f^H g|^2 for unit-power beams f with the given element phases.

    ``g`` is the effective receive vector (e.g. H^H w), ``phases`` is
    (n, M); beam elements are exp(j*phase)/sqrt(M).
    """
    m = phases.shape[1]
    proj = np.exp(1j * phases) @ np.conj(g)
    return np.abs(proj) ** 2 / m


def _power_samples_loops(g, phases):
    n, m = phases.shape
    out = np.empty(n)
    for i in range(n):
        acc = 0.0 + 0.0j
        for j in range(m):
            acc += np.conj(g[j]) * np.exp(1j * phases[i, j])
        out[i] = (acc.real * acc.real + acc.imag * acc.imag) / m
    return out


# ---------------------------------------------------------------------------
# value-network forward / TD update
#
# The network maps a phase-index state (M integers in [0, 2^r)) to one
# action value per action.  The input layer is a one-hot-per-antenna
# encoding realized as a row gather from W1 (shape (M*2^r, H)).
# ---------------------------------------------------------------------------

def net_forward_numpy(idx, w1, b1, w2, b2, w3, b3, offsets):
    """Action values for a batch of states. idx is (B, M) int64."""
    rows = idx + offsets[None, :]
    h1 = np.maximum(w1[rows].sum(axis=1) + b1, 0.0)
    h2 = np.maximum(h1 @ w2 + b2, 0.0)
    return h2 @ w3 + b3


def _net_forward_loops(idx, w1, b1, w2, b2, w3, b3, offsets):
    batch, m = idx.shape
    nh1 = b1.shape[0]
    nh2 = b2.shape[0]
    na = b3.shape[0]
    out = np.empty((batch, na))
    for s in range(batch):
        h1 = b1.copy()
        for j in range(m):
            row = offsets[j] + idx[s, j]
            for k in range(nh1):
                h1[k] += w1[row, k]
        for k in range(nh1):
            if h1[k] < 0.0:
                h1[k] = 0.0
        h2 = b2.copy()
        for k in range(nh2):
            acc = h2[k]
            for i in range(nh1):
                acc += h1[i] * w2[i, k]
            h2[k] = acc if acc > 0.0 else 0.0
        for k in range(na):
            acc = b3[k]
            for i in range(nh2):
                acc += h2[i] * w3[i, k]
            out[s, k] = acc
    return out


def net_td_step_numpy(idx, actions, targets, w1, b1, w2, b2, w3, b3,
                      offsets, lr):
    """One SGD step on the squared TD error, averaged over the batch.

    Updates the weight arrays in place and returns the mean squared
    error before the step.
    """
    batch = idx.shape[0]
    rows = idx + offsets[None, :]
    h1p = w1[rows].sum(axis=1) + b1
    h1 = np.maximum(h1p, 0.0)
    h2p = h1 @ w2 + b2
    h2 = np.maximum(h2p, 0.0)
    q = h2 @ w3 + b3

    err = q[np.arange(batch), actions] - targets
    loss = float(np.mean(err**2))

    dq = np.zeros_like(q)
    dq[np.arange(batch), actions] = 2.0 * err / batch
    dw3 = h2.T @ dq
    db3 = dq.sum(axis=0)
    dh2 = (dq @ w3.T) * (h2p > 0.0)
    dw2 = h1.T @ dh2
    db2 = dh2.sum(axis=0)
    dh1 = (dh2 @ w2.T) * (h1p > 0.0)
    db1 = dh1.sum(axis=0)

    w3 -= lr * dw3
    b3 -= lr * db3
    w2 -= lr * dw2
    b2 -= lr * db2
    b1 -= lr * db1
    np.subtract.at(w1, rows.ravel(), lr * np.repeat(dh1, idx.shape[1], axis=0))
    return loss


def _net_td_step_loops(idx, actions, targets, w1, b1, w2, b2, w3, b3,
                       offsets, lr):
    batch, m = idx.shape
    nh1 = b1.shape[0]
    nh2 = b2.shape[0]
    na = b3.shape[0]

    dw1 = np.zeros_like(w1)
    db1 = np.zeros_like(b1)
    dw2 = np.zeros_like(w2)
    db2 = np.zeros_like(b2)
    dw3 = np.zeros_like(w3)
    db3 = np.zeros_like(b3)
    loss = 0.0

    h1p = np.empty(nh1)
    h2p = np.empty(nh2)
    h1 = np.empty(nh1)
    h2 = np.empty(nh2)
    dh1 = np.empty(nh1)
    dh2 = np.empty(nh2)

    for s in range(batch):
        for k in range(nh1):
            h1p[k] = b1[k]
        for j in range(m):
            row = offsets[j] + idx[s, j]
            for k in range(nh1):
                h1p[k] += w1[row, k]
        for k in range(nh1):
            h1[k] = h1p[k] if h1p[k] > 0.0 else 0.0
        for k in range(nh2):
            acc = b2[k]
            for i in range(nh1):
                acc += h1[i] * w2[i, k]
            h2p[k] = acc
            h2[k] = acc if acc > 0.0 else 0.0
        a = actions[s]
        qa = b3[a]
        for i in range(nh2):
            qa += h2[i] * w3[i, a]
        err = qa - targets[s]
        loss += err * err
        grad = 2.0 * err / batch

        # backward through the single active output unit
        db3[a] += grad
        for i in range(nh2):
            dw3[i, a] += grad * h2[i]
            dh2[i] = grad * w3[i, a] if h2p[i] > 0.0 else 0.0
        for i in range(nh1):
            acc = 0.0
            for k in range(nh2):
                acc += dh2[k] * w2[i, k]
            dh1[i] = acc if h1p[i] > 0.0 else 0.0
        for k in range(nh2):
            db2[k] += dh2[k]
            for i in range(nh1):
                dw2[i, k] += h1[i] * dh2[k]
        for k in range(nh1):
            db1[k] += dh1[k]
        for j in range(m):
            row = offsets[j] + idx[s, j]
            for k in range(nh1):
                dw1[row, k] += dh1[k]

    for i in range(w1.shape[0]):
        for k in range(nh1):
            w1[i, k] -= lr * dw1[i, k]
    for k in range(nh1):
        b1[k] -= lr * db1[k]
    for i in range(nh1):
        for k in range(nh2):
            w2[i, k] -= lr * dw2[i, k]
    for k in range(nh2):
        b2[k] -= lr * db2[k]
    for i in range(nh2):
        for k in range(na):
            w3[i, k] -= lr * dw3[i, k]
    for k in range(na):
        b3[k] -= lr * db3[k]
    return loss / batch


# ---------------------------------------------------------------------------
# Hermitian eigenvalues via cyclic Jacobi rotations
#
# Matrices here live in multipath space (L x L with L <= 8), so a
# textbook Jacobi sweep is plenty; numpy's eigvalsh serves as the
# independent oracle in the tests, never as the implementation.
# ---------------------------------------------------------------------------

def _jacobi_eigvalsh_impl(a):
    n = a.shape[0]
    if n == 1:
        return np.array([a[0, 0].real])
    m = a.copy().astype(np.complex128)
    for _ in range(60):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off += abs(m[p, q]) ** 2
        if off < 1e-28 * n * n:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = m[p, q]
                mag = abs(apq)
                if mag < 1e-300:
                    continue
                phase = apq / mag
                app = m[p, p].real
                aqq = m[q, q].real
                tau = (aqq - app) / (2.0 * mag)
                if tau >= 0.0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                # columns p and q
                for k in range(n):
                    mkp = m[k, p]
                    mkq = m[k, q]
                    m[k, p] = c * mkp - s * np.conj(phase) * mkq
                    m[k, q] = s * phase * mkp + c * mkq
                # rows p and q
                for k in range(n):
                    mpk = m[p, k]
                    mqk = m[q, k]
                    m[p, k] = c * mpk - s * phase * mqk
                    m[q, k] = s * np.conj(phase) * mpk + c * mqk
    vals = np.empty(n)
    for k in range(n):
        vals[k] = m[k, k].real
    return np.sort(vals)


def jacobi_eigvalsh_numpy(a: np.ndarray) -> np.ndarray:
    """Eigenvalues of a Hermitian matrix, ascending (Jacobi sweeps)."""
    return _jacobi_eigvalsh_impl(a)


if NUMBA_ENABLED:
    power_samples_numba = njit(cache=True)(_power_samples_loops)
    net_forward_numba = njit(cache=True)(_net_forward_loops)
    net_td_step_numba = njit(cache=True)(_net_td_step_loops)
    jacobi_eigvalsh_numba = njit(cache=True)(_jacobi_eigvalsh_impl)

    power_samples = power_samples_numba
    net_forward = net_forward_numba
    net_td_step = net_td_step_numba
    jacobi_eigvalsh = jacobi_eigvalsh_numba
else:
    power_samples_numba = None
    net_forward_numba = None
    net_td_step_numba = None
    jacobi_eigvalsh_numba = None

    power_samples = power_samples_numpy
    net_forward = net_forward_numpy
    net_td_step = net_td_step_numpy
    jacobi_eigvalsh = jacobi_eigvalsh_numpy


IMPLEMENTATIONS = {
    "power_samples": {"numpy": power_samples_numpy, "numba": power_samples_numba},
    "net_forward": {"numpy": net_forward_numpy, "numba": net_forward_numba},
    "net_td_step": {"numpy": net_td_step_numpy, "numba": net_td_step_numba},
    "jacobi_eigvalsh": {"numpy": jacobi_eigvalsh_numpy, "numba": jacobi_eigvalsh_numba},
}
