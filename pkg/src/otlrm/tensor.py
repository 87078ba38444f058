"""Third-order tensor algebra in a transform domain.

Tensors are plain ``numpy.ndarray`` objects of shape ``(n1, n2, n3)``; the
third axis indexes frontal slices.  Matrices are 2-D arrays.  On disk tensors
are stored frontal-slice-major (slice index outermost, each slice row-major),
see :mod:`otlrm.io`.
"""
import numpy as np

from .errors import DimensionError, NumericError


def as_tensor3(X, dtype=None, name="tensor"):
    """Validate ``X`` as a finite real 3-D array and return it as ndarray."""
    X = np.asarray(X, dtype=dtype)
    if X.ndim != 3:
        raise DimensionError(f"{name} must be 3-D, got shape {X.shape}")
    if min(X.shape) < 1:
        raise DimensionError(f"{name} has an empty dimension: {X.shape}")
    if not np.issubdtype(X.dtype, np.floating):
        X = X.astype(np.float64)
    if not np.all(np.isfinite(X)):
        raise NumericError(f"{name} contains NaN or Inf")
    return X


def as_matrix(M, dtype=None, name="matrix"):
    M = np.asarray(M, dtype=dtype)
    if M.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {M.shape}")
    if not np.issubdtype(M.dtype, np.floating):
        M = M.astype(np.float64)
    if not np.all(np.isfinite(M)):
        raise NumericError(f"{name} contains NaN or Inf")
    return M


def mode3_product(X, M):
    """Multiply every tube ``X[i, j, :]`` by ``M``; returns shape (n1, n2, m)."""
    X = np.asarray(X)
    M = np.asarray(M)
    if X.ndim != 3 or M.ndim != 2 or M.shape[1] != X.shape[2]:
        raise DimensionError(
            f"mode-3 product needs M with {X.shape[-1]} columns, got {M.shape}"
        )
    return X @ M.T


def mode3_unfold(X):
    """Mode-3 matricization, shape (n3, n1*n2); column index is i*n2 + j."""
    X = np.asarray(X)
    if X.ndim != 3:
        raise DimensionError(f"expected a 3-D tensor, got shape {X.shape}")
    n1, n2, n3 = X.shape
    return X.reshape(n1 * n2, n3).T.copy()


def mode3_fold(A, shape):
    A = np.asarray(A)
    n1, n2, n3 = shape
    if A.shape != (n3, n1 * n2):
        raise DimensionError(f"cannot fold {A.shape} into {tuple(shape)}")
    return A.T.reshape(n1, n2, n3).copy()


def _slices(X):
    # (n3, a, b) view for batched matmul
    return np.moveaxis(X, 2, 0)


def _unslices(Y):
    return np.ascontiguousarray(np.moveaxis(Y, 0, 2))


def facewise_product(A, B):
    """Slice-wise matrix product: ``C[:, :, k] = A[:, :, k] @ B[:, :, k]``."""
    A = np.asarray(A)
    B = np.asarray(B)
    if A.ndim != 3 or B.ndim != 3 or A.shape[1] != B.shape[0] or A.shape[2] != B.shape[2]:
        raise DimensionError(f"face-wise product shapes {A.shape} and {B.shape} do not conform")
    return _unslices(np.matmul(_slices(A), _slices(B)))


def facewise_transpose(A):
    A = np.asarray(A)
    if A.ndim != 3:
        raise DimensionError(f"expected a 3-D tensor, got shape {A.shape}")
    return np.ascontiguousarray(A.transpose(1, 0, 2))


def diag_embed(S):
    """Map an (n3, r) matrix to the f-diagonal (r, r, n3) tensor with slices diag(S[k])."""
    S = np.asarray(S)
    if S.ndim != 2:
        raise DimensionError(f"diag_embed expects a matrix, got shape {S.shape}")
    n3, r = S.shape
    out = np.zeros((r, r, n3), dtype=S.dtype)
    idx = np.arange(r)
    out[idx, idx, :] = S.T
    return out


def identity_tensor(n, n3, dtype=np.float64):
    """Tensor whose every frontal slice is the n x n identity."""
    return np.repeat(np.eye(n, dtype=dtype)[:, :, None], n3, axis=2)


def _matrix_of(L):
    return getattr(L, "L", L)


def transform(X, L):
    """``X x_3 L`` for an OrthoTransform or plain matrix ``L``."""
    return mode3_product(X, _matrix_of(L))


def inverse_transform(X, L):
    """Inverse of :func:`transform` for an orthogonal ``L`` (uses ``L^T``)."""
    return mode3_product(X, _matrix_of(L).T)


def t_product(A, B, L):
    """Tensor-tensor product ``L^{-1}(L(A) face-wise L(B))``."""
    A = np.asarray(A)
    B = np.asarray(B)
    if A.ndim != 3 or B.ndim != 3 or A.shape[1] != B.shape[0] or A.shape[2] != B.shape[2]:
        raise DimensionError(f"t-product shapes {A.shape} and {B.shape} do not conform")
    return inverse_transform(facewise_product(transform(A, L), transform(B, L)), L)


def t_transpose(A, L):
    """Tensor transpose under ``L``: ``L(t_transpose(A))`` is the slice-wise transpose of ``L(A)``."""
    return inverse_transform(facewise_transpose(transform(A, L)), L)
