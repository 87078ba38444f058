"""Hot numerical kernels.

Each kernel exists twice: a vectorised numpy implementation and a loop
implementation compiled with numba.  The numba path is used when numba is
importable and ``OTLRM_DISABLE_NUMBA`` is unset (or ``0``); otherwise the numpy
path is used.  Both implementations are importable directly for testing and
benchmarking (``*_numpy`` / ``*_numba``).
"""
import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("OTLRM_DISABLE_NUMBA", "0") in ("", "0")

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 60


# ---------------------------------------------------------------------------
# Householder chain  L = F_1 F_2 ... F_n,  F_i = I - 2 w_i w_i^T / |w_i|^2
# ---------------------------------------------------------------------------

def chain_forward_numpy(W):
    """Return (L, prefixes) where prefixes[i] = F_1 ... F_i (prefixes[0] = I)."""
    n = W.shape[0]
    m = W.shape[1]
    prefixes = np.empty((m + 1, n, n), dtype=W.dtype)
    P = np.eye(n, dtype=W.dtype)
    prefixes[0] = P
    for i in range(m):
        w = W[:, i]
        P = P - (2.0 / (w @ w)) * np.outer(P @ w, w)
        prefixes[i + 1] = P
    return P, prefixes


def chain_backward_numpy(W, prefixes, G):
    """Vector-Jacobian product of the chain: d<G, L>/dW."""
    m = W.shape[1]
    gW = np.zeros_like(W)
    B = G.copy()
    for i in range(m - 1, -1, -1):
        w = W[:, i]
        nrm = np.sqrt(w @ w)
        u = w / nrm
        P = prefixes[i]
        Bu = B @ u
        gu = -2.0 * (P.T @ Bu + B.T @ (P @ u))
        gW[:, i] = (gu - u * (u @ gu)) / nrm
        B = B - 2.0 * np.outer(Bu, u)
    return gW


def _chain_forward_loops(W):
    n = W.shape[0]
    m = W.shape[1]
    prefixes = np.zeros((m + 1, n, n), dtype=W.dtype)
    for a in range(n):
        prefixes[0, a, a] = 1.0
    Pw = np.empty(n, dtype=W.dtype)
    for i in range(m):
        s = 0.0
        for a in range(n):
            s += W[a, i] * W[a, i]
        c = 2.0 / s
        for a in range(n):
            acc = 0.0
            for b in range(n):
                acc += prefixes[i, a, b] * W[b, i]
            Pw[a] = acc
        for a in range(n):
            for b in range(n):
                prefixes[i + 1, a, b] = prefixes[i, a, b] - c * Pw[a] * W[b, i]
    return prefixes[m].copy(), prefixes


def _chain_backward_loops(W, prefixes, G):
    n = W.shape[0]
    m = W.shape[1]
    gW = np.zeros_like(W)
    B = G.copy()
    u = np.empty(n, dtype=W.dtype)
    Bu = np.empty(n, dtype=W.dtype)
    Pu = np.empty(n, dtype=W.dtype)
    gu = np.empty(n, dtype=W.dtype)
    for i in range(m - 1, -1, -1):
        s = 0.0
        for a in range(n):
            s += W[a, i] * W[a, i]
        nrm = np.sqrt(s)
        for a in range(n):
            u[a] = W[a, i] / nrm
        for a in range(n):
            acc_b = 0.0
            acc_p = 0.0
            for b in range(n):
                acc_b += B[a, b] * u[b]
                acc_p += prefixes[i, a, b] * u[b]
            Bu[a] = acc_b
            Pu[a] = acc_p
        for a in range(n):
            acc = 0.0
            for b in range(n):
                acc += prefixes[i, b, a] * Bu[b] + B[b, a] * Pu[b]
            gu[a] = -2.0 * acc
        dot = 0.0
        for a in range(n):
            dot += u[a] * gu[a]
        for a in range(n):
            gW[a, i] = (gu[a] - u[a] * dot) / nrm
        for a in range(n):
            for b in range(n):
                B[a, b] -= 2.0 * Bu[a] * u[b]
    return gW


# ---------------------------------------------------------------------------
# One-sided (Hestenes) Jacobi sweeps on the columns of a tall matrix
# ---------------------------------------------------------------------------

def jacobi_sweeps_numpy(U, V, tol, max_sweeps):
    """Orthogonalise the columns of U in place, accumulating rotations in V.

    Returns the number of sweeps performed, or -1 when not converged.
    """
    n = U.shape[1]
    for sweep in range(1, max_sweeps + 1):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                up = U[:, p]
                uq = U[:, q]
                alpha = up @ up
                beta = uq @ uq
                gamma = up @ uq
                if gamma == 0.0 or abs(gamma) <= tol * np.sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = np.copysign(1.0, zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                U[:, p], U[:, q] = c * up - s * uq, s * up + c * uq
                vp = V[:, p].copy()
                vq = V[:, q]
                V[:, p], V[:, q] = c * vp - s * vq, s * vp + c * vq
        if not rotated:
            return sweep
    return -1


def _jacobi_sweeps_loops(U, V, tol, max_sweeps):
    m = U.shape[0]
    n = U.shape[1]
    nv = V.shape[0]
    for sweep in range(1, max_sweeps + 1):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = 0.0
                beta = 0.0
                gamma = 0.0
                for i in range(m):
                    alpha += U[i, p] * U[i, p]
                    beta += U[i, q] * U[i, q]
                    gamma += U[i, p] * U[i, q]
                if gamma == 0.0 or abs(gamma) <= tol * np.sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                sgn = 1.0 if zeta >= 0.0 else -1.0
                t = sgn / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                for i in range(m):
                    a = U[i, p]
                    b = U[i, q]
                    U[i, p] = c * a - s * b
                    U[i, q] = s * a + c * b
                for i in range(nv):
                    a = V[i, p]
                    b = V[i, q]
                    V[i, p] = c * a - s * b
                    V[i, q] = s * a + c * b
        if not rotated:
            return sweep
    return -1


if HAVE_NUMBA:
    chain_forward_numba = njit(cache=True)(_chain_forward_loops)
    chain_backward_numba = njit(cache=True)(_chain_backward_loops)
    jacobi_sweeps_numba = njit(cache=True)(_jacobi_sweeps_loops)
else:  # pragma: no cover
    chain_forward_numba = chain_forward_numpy
    chain_backward_numba = chain_backward_numpy
    jacobi_sweeps_numba = jacobi_sweeps_numpy


if USE_NUMBA:
    chain_forward = chain_forward_numba
    chain_backward = chain_backward_numba
    jacobi_sweeps = jacobi_sweeps_numba
else:
    chain_forward = chain_forward_numpy
    chain_backward = chain_backward_numpy
    jacobi_sweeps = jacobi_sweeps_numpy


def backend():
    return "numba" if USE_NUMBA else "numpy"
