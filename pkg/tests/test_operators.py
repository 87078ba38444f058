import numpy as np
import pytest

from otlrm import operators
from otlrm.errors import DimensionError, PreconditionError
from otlrm.operators import (Cassi, Completion, Noise, add_gaussian_noise, apply_completion,
                             bernoulli_mask, binary_mask, cassi_adjoint, cassi_forward, cassi_width)


def test_bernoulli_extremes_and_rate():
    assert bernoulli_mask((3, 4, 5), 1.0, 0).all()
    assert not bernoulli_mask((3, 4, 5), 0.0, 0).any()
    m = bernoulli_mask((100, 100, 10), 0.5, 42)
    assert 0.49 <= m.mean() <= 0.51
    assert np.array_equal(m, bernoulli_mask((100, 100, 10), 0.5, 42))
    with pytest.raises(PreconditionError):
        bernoulli_mask((2, 2, 2), 1.5, 0)


def test_completion_projector(rng):
    X = rng.standard_normal((4, 5, 3))
    assert np.array_equal(apply_completion(X, np.ones(X.shape, bool)), X)
    mask = bernoulli_mask(X.shape, 0.4, 1)
    once = apply_completion(X, mask)
    assert np.array_equal(apply_completion(once, mask), once)
    rest = apply_completion(X, ~mask)
    assert abs((once ** 2).sum() + (rest ** 2).sum() - (X ** 2).sum()) < 1e-12
    Y = rng.standard_normal(X.shape)
    assert abs((once * Y).sum() - (X * apply_completion(Y, mask)).sum()) < 1e-12
    with pytest.raises(DimensionError):
        apply_completion(X, mask[:, :, :2])


def test_cassi_no_shift_single_band(rng):
    X = rng.standard_normal((4, 5, 1))
    M = rng.random((4, 5))
    assert np.array_equal(cassi_forward(X, M, 2), X[:, :, 0] * M)


def test_cassi_impulse():
    n1, n2, n3, d = 3, 4, 5, 2
    for i, j, k in [(0, 0, 0), (2, 3, 4), (1, 2, 3)]:
        X = np.zeros((n1, n2, n3))
        X[i, j, k] = 1.0
        out = cassi_forward(X, np.ones((n1, n2)), d)
        assert out.shape == (n1, cassi_width(n2, n3, d))
        assert out.sum() == 1.0 and out[i, j + d * k] == 1.0


def test_cassi_width():
    assert cassi_width(32, 8, 2) == 46
    assert cassi_width(256, 31, 2) == 316


def test_cassi_linear(rng):
    X, Y = rng.standard_normal((2, 6, 5, 4))
    M = binary_mask((6, 5), 0)
    a, b = 0.5, -2.0
    lhs = cassi_forward(a * X + b * Y, M, 3)
    rhs = a * cassi_forward(X, M, 3) + b * cassi_forward(Y, M, 3)
    # equal up to the order of band summation
    assert np.abs(lhs - rhs).max() < 1e-13


def test_cassi_adjoint_identity(rng):
    X = rng.standard_normal((6, 5, 4))
    M = rng.random((6, 5))
    B = rng.standard_normal((6, cassi_width(5, 4, 2)))
    lhs = (cassi_forward(X, M, 2) * B).sum()
    # transpose built entry by entry, independent of the vectorised adjoint
    HtB = np.zeros_like(X)
    for i in range(6):
        for j in range(5):
            for k in range(4):
                HtB[i, j, k] = B[i, j + 2 * k] * M[i, j]
    assert abs(lhs - (X * HtB).sum()) < 1e-10
    assert np.allclose(cassi_adjoint(B, M, 2, 4), HtB, atol=0)


def test_cassi_errors(rng):
    with pytest.raises(DimensionError):
        cassi_forward(rng.standard_normal((4, 5, 3)), np.ones((4, 4)), 2)
    with pytest.raises(PreconditionError):
        Cassi(np.ones((2, 2)), 0)


def test_noise_statistics():
    Y = np.zeros((100, 100, 100))
    sigma = 0.3
    N = add_gaussian_noise(Y, sigma, seed=11)
    n = N.size
    assert abs(N.mean()) <= 3 * sigma / np.sqrt(n)
    assert abs(N.var() / sigma ** 2 - 1) < 0.05
    assert np.array_equal(N, add_gaussian_noise(Y, sigma, seed=11))


def test_noise_zero_sigma(rng):
    Y = rng.standard_normal((3, 3, 3))
    assert np.array_equal(add_gaussian_noise(Y, 0.0, 1), Y)
    assert np.array_equal(Noise(0.0).simulate(Y, 1), Y)
    with pytest.raises(PreconditionError):
        add_gaussian_noise(Y, -1.0)


def test_operator_shapes():
    assert Completion(np.ones((2, 3, 4), bool)).observation_shape((2, 3, 4)) == (2, 3, 4)
    assert Cassi(np.ones((2, 3)), 2).observation_shape((2, 3, 4)) == (2, 9)
    assert Noise(0.1).observation_shape((2, 3, 4)) == (2, 3, 4)
    assert operators.Noise.default_loss == "l1"
