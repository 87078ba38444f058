"""Transform-domain t-SVD tools: slice SVDs, t-SVT, tensor nuclear norm, tubal rank.

The SVD is a one-sided Jacobi method (see :mod:`otlrm.kernels`).  It is
accurate for the small slices used here but scales as O(n^3) per sweep and
is not meant for slices much larger than a few hundred.
"""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import NumericError
from .tensor import as_matrix, as_tensor3, inverse_transform, transform


def _complete_basis(U, k):
    """Replace columns k: of U (orthonormal first k columns) by an orthonormal completion."""
    m, n = U.shape
    basis = [U[:, j] for j in range(k)]
    e = 0
    for j in range(k, n):
        while True:
            v = np.zeros(m)
            v[e % m] = 1.0
            e += 1
            for b in basis:
                v -= (b @ v) * b
            for b in basis:
                v -= (b @ v) * b
            nv = np.linalg.norm(v)
            if nv > 1e-6:
                break
        v /= nv
        U[:, j] = v
        basis.append(v)
    return U


def jacobi_svd(A, tol=kernels.JACOBI_TOL, max_sweeps=kernels.JACOBI_MAX_SWEEPS):
    """Thin SVD ``A = U diag(s) V^T`` by one-sided Jacobi rotations.

    Returns ``U`` (m, p), ``s`` (p,) nonincreasing and ``V`` (n, p) with
    ``p = min(m, n)``.
    """
    A = as_matrix(A, dtype=np.float64, name="A")
    m, n = A.shape
    if m < n:
        V, s, U = jacobi_svd(A.T, tol, max_sweeps)
        return U, s, V
    U = np.array(A, dtype=np.float64, order="C")
    V = np.eye(n)
    sweeps = kernels.jacobi_sweeps(U, V, tol, max_sweeps)
    if sweeps < 0:
        raise NumericError(f"Jacobi SVD did not converge in {max_sweeps} sweeps")
    s = np.linalg.norm(U, axis=0)
    order = np.argsort(-s, kind="stable")
    s, U, V = s[order], U[:, order], V[:, order]
    smax = s[0] if n else 0.0
    nz = int(np.count_nonzero(s > smax * 1e-15)) if smax > 0 else 0
    U[:, :nz] /= s[:nz]
    s[nz:] = 0.0
    if nz < n:
        U = _complete_basis(U, nz)
    return U, s, V


@dataclass(frozen=True)
class SliceSvd:
    """Per-slice SVD of a transformed tensor; arrays are indexed by slice first."""

    U: np.ndarray  # (n3, n1, p)
    s: np.ndarray  # (n3, p)
    V: np.ndarray  # (n3, n2, p)

    def recompose(self, s=None):
        s = self.s if s is None else s
        return np.moveaxis((self.U * s[:, None, :]) @ np.swapaxes(self.V, 1, 2), 0, 2)


def slice_svd(X_hat):
    """SVD of every frontal slice of an already transformed tensor."""
    parts = [jacobi_svd(X_hat[:, :, k]) for k in range(X_hat.shape[2])]
    return SliceSvd(*(np.stack(a) for a in zip(*parts)))


def singular_values(X, L=None):
    """Singular values of every frontal slice of ``L(X)``, shape (n3, min(n1, n2))."""
    X = as_tensor3(X)
    X_hat = X if L is None else transform(X, L)
    return np.stack([jacobi_svd(X_hat[:, :, k])[1] for k in range(X.shape[2])])


def matrix_svt(A, gamma):
    """Singular value soft-thresholding: the prox of ``gamma * nuclear norm``."""
    if gamma < 0:
        raise ValueError(f"threshold must be nonnegative, got {gamma}")
    U, s, V = jacobi_svd(A)
    return (U * np.maximum(s - gamma, 0.0)) @ V.T


def tsvt(X, L, gamma):
    """t-SVT under orthogonal ``L``: shrink the singular values of each slice of ``L(X)``."""
    if gamma < 0:
        raise ValueError(f"threshold must be nonnegative, got {gamma}")
    X = as_tensor3(X)
    svd = slice_svd(transform(X, L))
    return inverse_transform(svd.recompose(np.maximum(svd.s - gamma, 0.0)), L)


def tnn(X, L):
    """Tensor nuclear norm: total of slice nuclear norms of ``L(X)``."""
    return float(singular_values(X, L).sum())


def tsvt_objective(Z, Y, L, gamma):
    """``gamma * tnn(Z) + 0.5 * |Z - Y|_F^2``, minimised by ``tsvt(Y, L, gamma)``."""
    return gamma * tnn(Z, L) + 0.5 * float(((np.asarray(Z) - Y) ** 2).sum())


def tubal_rank(X, L=None, tol=1e-9):
    """Largest slice rank of ``L(X)``, counting singular values above ``tol * s_max``."""
    s = singular_values(X, L)
    smax = s.max()
    if smax == 0:
        return 0
    return int((s > tol * smax).sum(axis=1).max())
