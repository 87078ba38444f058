import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from otlrm.errors import DimensionError, NumericError
from otlrm.ortho import OrthoTransform
from otlrm.tensor import (as_tensor3, diag_embed, facewise_product, facewise_transpose,
                          identity_tensor, inverse_transform, mode3_fold, mode3_product,
                          mode3_unfold, t_product, t_transpose, transform)

dims = st.integers(1, 4)


def test_rejects_non_finite():
    X = np.zeros((2, 2, 2))
    X[0, 1, 1] = np.nan
    with pytest.raises(NumericError):
        as_tensor3(X)
    with pytest.raises(DimensionError):
        as_tensor3(np.zeros((2, 2)))


def test_mode3_swaps_tube():
    X = np.array([1.0, 2.0]).reshape(1, 1, 2)
    out = mode3_product(X, np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert out[0, 0].tolist() == [2.0, 1.0]


def test_mode3_identity(rng):
    X = rng.standard_normal((3, 4, 5))
    assert np.array_equal(mode3_product(X, np.eye(5)), X)


def test_mode3_triple_loop(rng):
    X = rng.standard_normal((2, 2, 3))
    M = rng.standard_normal((3, 3))
    ref = np.zeros((2, 2, 3))
    for i in range(2):
        for j in range(2):
            for a in range(3):
                ref[i, j, a] = sum(M[a, b] * X[i, j, b] for b in range(3))
    assert np.allclose(mode3_product(X, M), ref, atol=1e-14)


def test_mode3_nonsquare_and_mismatch(rng):
    X = rng.standard_normal((2, 3, 4))
    assert mode3_product(X, rng.standard_normal((5, 4))).shape == (2, 3, 5)
    with pytest.raises(DimensionError):
        mode3_product(X, np.eye(3))


def test_unfold_tube():
    X = np.array([1.0, 2.0, 3.0]).reshape(1, 1, 3)
    U = mode3_unfold(X)
    assert U.shape == (3, 1)
    assert U[:, 0].tolist() == [1.0, 2.0, 3.0]


def test_fold_roundtrip(rng):
    X = rng.standard_normal((3, 4, 5))
    assert np.array_equal(mode3_fold(mode3_unfold(X), X.shape), X)
    with pytest.raises(DimensionError):
        mode3_fold(mode3_unfold(X), (3, 5, 5))


def test_unfold_commutes(rng):
    X = rng.standard_normal((3, 4, 5))
    M = rng.standard_normal((5, 5))
    assert np.allclose(mode3_unfold(mode3_product(X, M)), M @ mode3_unfold(X), atol=1e-13)


def test_facewise_scalar_slices():
    A = np.array([2.0, 3.0]).reshape(1, 1, 2)
    B = np.array([5.0, 7.0]).reshape(1, 1, 2)
    assert facewise_product(A, B)[0, 0].tolist() == [10.0, 21.0]


def test_facewise_identity_and_oracle(rng):
    A = rng.standard_normal((2, 3, 2))
    assert np.array_equal(facewise_product(A, identity_tensor(3, 2)), A)
    B = rng.standard_normal((3, 2, 2))
    C = facewise_product(A, B)
    for k in range(2):
        naive = [[sum(A[i, l, k] * B[l, j, k] for l in range(3)) for j in range(2)] for i in range(2)]
        assert np.allclose(C[:, :, k], naive, atol=1e-14)
    with pytest.raises(DimensionError):
        facewise_product(A, rng.standard_normal((2, 2, 2)))


def test_facewise_transpose(rng):
    A = rng.standard_normal((2, 3, 2))
    T = facewise_transpose(A)
    assert T.shape == (3, 2, 2)
    for k in range(2):
        assert np.array_equal(T[:, :, k], A[:, :, k].T)
    assert np.array_equal(facewise_transpose(T), A)
    B = rng.standard_normal((3, 4, 2))
    lhs = facewise_transpose(facewise_product(A, B))
    rhs = facewise_product(facewise_transpose(B), facewise_transpose(A))
    assert np.allclose(lhs, rhs, atol=1e-14)


def test_diag_embed():
    D = diag_embed(np.array([[1.0, 2.0], [3.0, 4.0]]))
    assert np.array_equal(D[:, :, 0], np.diag([1.0, 2.0]))
    assert np.array_equal(D[:, :, 1], np.diag([3.0, 4.0]))
    assert not diag_embed(np.zeros((3, 2))).any()


def test_diag_embed_offdiag_zero(rng):
    D = diag_embed(rng.standard_normal((4, 3)))
    off = D * (1 - np.eye(3))[:, :, None]
    assert np.abs(off).sum() == 0.0


def test_t_product_identity_transform(rng):
    A = rng.standard_normal((2, 3, 4))
    B = rng.standard_normal((3, 2, 4))
    assert np.allclose(t_product(A, B, np.eye(4)), facewise_product(A, B), atol=1e-14)


def test_t_product_identity_element(rng):
    L = OrthoTransform.random(4, rng)
    A = rng.standard_normal((3, 2, 4))
    I_hat = inverse_transform(identity_tensor(2, 4), L)
    assert np.allclose(t_product(A, I_hat, L), A, atol=1e-12)


def test_t_product_three_step_loop(rng):
    L = OrthoTransform.random(3, rng).L
    A = rng.standard_normal((2, 3, 3))
    B = rng.standard_normal((3, 2, 3))
    Ah = np.einsum("ab,ijb->ija", L, A)
    Bh = np.einsum("ab,ijb->ija", L, B)
    Ch = np.zeros((2, 2, 3))
    for k in range(3):
        Ch[:, :, k] = Ah[:, :, k] @ Bh[:, :, k]
    ref = np.einsum("ba,ijb->ija", L, Ch)
    assert np.allclose(t_product(A, B, L), ref, atol=1e-12)


def test_t_transpose(rng):
    L = OrthoTransform.random(4, rng)
    A = rng.standard_normal((2, 3, 4))
    assert np.allclose(transform(t_transpose(A, L), L), facewise_transpose(transform(A, L)), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(n1=dims, n2=dims, n3=dims, m=dims, seed=st.integers(0, 2**31))
def test_mode3_composition(n1, n2, n3, m, seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n1, n2, n3))
    M1 = rng.standard_normal((m, n3))
    M2 = rng.standard_normal((3, m))
    assert np.allclose(mode3_product(mode3_product(X, M1), M2), mode3_product(X, M2 @ M1),
                       atol=1e-12, rtol=0)


@settings(max_examples=40, deadline=None)
@given(n1=dims, n2=dims, n3=dims, seed=st.integers(0, 2**31),
       c=st.sampled_from([-1.0, 0.5, 2.0, -4.0, 0.25]))
def test_facewise_bilinear(n1, n2, n3, seed, c):
    # power-of-two scalars commute with rounding, so equality is exact
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n1, 3, n3))
    B = rng.standard_normal((3, n2, n3))
    assert np.array_equal(facewise_product(c * A, B), c * facewise_product(A, B))
    assert np.array_equal(facewise_product(A, c * B), c * facewise_product(A, B))


@settings(max_examples=30, deadline=None)
@given(n3=st.integers(1, 5), seed=st.integers(0, 2**31))
def test_t_product_associative(n3, seed):
    rng = np.random.default_rng(seed)
    L = OrthoTransform.random(n3, rng)
    A = rng.standard_normal((2, 3, n3))
    B = rng.standard_normal((3, 4, n3))
    C = rng.standard_normal((4, 2, n3))
    lhs = t_product(t_product(A, B, L), C, L)
    rhs = t_product(A, t_product(B, C, L), L)
    assert np.allclose(lhs, rhs, atol=1e-10, rtol=0)


@settings(max_examples=30, deadline=None)
@given(n1=dims, n2=dims, n3=dims, seed=st.integers(0, 2**31))
def test_fold_roundtrip_property(n1, n2, n3, seed):
    X = np.random.default_rng(seed).standard_normal((n1, n2, n3))
    assert np.array_equal(mode3_fold(mode3_unfold(X), X.shape), X)
