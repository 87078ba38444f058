"""Orthogonal matrices built from chains of Householder reflections.

An n x n parameter matrix ``W`` defines ``L = F_1 F_2 ... F_n`` with
``F_i = I - 2 w_i w_i^T / |w_i|^2`` and ``w_i`` the i-th column of ``W``.
``L`` is orthogonal for every admissible ``W``.

Note that a product of exactly n reflections has determinant ``(-1)^n``, so
:func:`build_matrix` reaches precisely the orthogonal matrices with that
determinant; :func:`decompose_orthogonal` rejects the other half.
"""
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DegenerateParameterError, DimensionError, PreconditionError
from .tensor import as_matrix, mode3_product

EPS_W = 1e-12


def householder_reflection(w, eps=EPS_W):
    w = np.asarray(w, dtype=np.float64).ravel()
    nrm2 = w @ w
    if not np.sqrt(nrm2) > eps:
        raise DegenerateParameterError(f"reflection vector norm {np.sqrt(nrm2):.3g} <= {eps:g}")
    return np.eye(w.size) - (2.0 / nrm2) * np.outer(w, w)


def check_columns(W, eps=EPS_W):
    norms = np.linalg.norm(W, axis=0)
    bad = np.flatnonzero(~(norms > eps))
    if bad.size:
        i = int(bad[0])
        raise DegenerateParameterError(
            f"column {i} of W has norm {norms[i]:.3g} <= {eps:g}"
        )


def build_matrix(W, eps=EPS_W):
    """Materialise ``L = F_1 F_2 ... F_n`` from the columns of ``W``."""
    W = as_matrix(W, name="W")
    if W.shape[0] != W.shape[1]:
        raise DimensionError(f"W must be square, got {W.shape}")
    check_columns(W, eps)
    L, _ = kernels.chain_forward(np.ascontiguousarray(W))
    return L


@dataclass(frozen=True)
class OrthoTransform:
    """Householder parameters ``W`` and the orthogonal matrix ``L`` they define."""

    W: np.ndarray
    L: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        W = np.array(self.W, dtype=np.float64)
        L = build_matrix(W)
        W.setflags(write=False)
        L.setflags(write=False)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "L", L)

    @property
    def n(self):
        return self.W.shape[0]

    @classmethod
    def random(cls, n, rng=None):
        rng = np.random.default_rng(rng)
        return cls(rng.standard_normal((n, n)))


def apply(X, T):
    """Transform every tube of ``X`` by ``L``."""
    L = T.L if isinstance(T, OrthoTransform) else np.asarray(T)
    if np.asarray(X).shape[-1] != L.shape[1]:
        raise DimensionError(f"tensor has n3={np.asarray(X).shape[-1]}, transform has n={L.shape[1]}")
    return mode3_product(X, L)


def apply_inverse(X, T):
    L = T.L if isinstance(T, OrthoTransform) else np.asarray(T)
    if np.asarray(X).shape[-1] != L.shape[0]:
        raise DimensionError(f"tensor has n3={np.asarray(X).shape[-1]}, transform has n={L.shape[0]}")
    return mode3_product(X, L.T)


def reflection_between(x, y, eps=EPS_W, norm_tol=1e-9):
    """Householder matrix ``F`` with ``F x = y`` for vectors of equal norm."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise DimensionError(f"vectors differ in length: {x.size} vs {y.size}")
    nx, ny = np.linalg.norm(x), np.linalg.norm(y)
    if abs(nx - ny) > norm_tol:
        raise PreconditionError(f"norms differ: |x|={nx:.12g}, |y|={ny:.12g}")
    d = x - y
    if not np.linalg.norm(d) > eps:
        raise DegenerateParameterError("x equals y; no reflection is needed")
    return householder_reflection(d / np.linalg.norm(d), eps)


def decompose_orthogonal(A, tol=1e-8, skip_tol=1e-14):
    """Parameters ``W`` with ``build_matrix(W) == A`` for an orthogonal ``A``.

    Triangularises ``A`` column by column with reflections that map the
    trailing part of column i onto ``+|x| e_i``; a final ``e_n`` reflection
    fixes a ``-1`` in the last diagonal entry.  Unused columns are filled
    with pairs of identical reflections, which cancel.
    """
    A = as_matrix(A, name="A")
    n = A.shape[0]
    if A.shape != (n, n):
        raise DimensionError(f"A must be square, got {A.shape}")
    err = np.abs(A.T @ A - np.eye(n)).max()
    if err >= tol:
        raise PreconditionError(f"A is not orthogonal: max|A^T A - I| = {err:.3g}")

    R = A.copy()
    vectors = []
    for i in range(n - 1):
        x = R[i:, i]
        y = np.zeros_like(x)
        y[0] = np.linalg.norm(x)
        d = x - y
        if np.linalg.norm(d) <= skip_tol:
            continue
        w = np.zeros(n)
        w[i:] = d
        R = R - (2.0 / (w @ w)) * np.outer(w, w @ R)
        vectors.append(w)
    if R[n - 1, n - 1] < 0:
        e = np.zeros(n)
        e[n - 1] = 1.0
        vectors.append(e)

    pad = n - len(vectors)
    if pad % 2:
        raise PreconditionError(
            f"det(A) = {np.linalg.det(A):+.0f} but a chain of {n} reflections has "
            f"determinant {(-1) ** n:+d}"
        )
    e1 = np.zeros(n)
    e1[0] = 1.0
    vectors.extend([e1] * pad)
    return np.column_stack(vectors)
