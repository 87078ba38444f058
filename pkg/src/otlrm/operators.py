"""Capture operators H(.) for completion, CASSI and denoising, plus simulators."""
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import DimensionError, PreconditionError
from .tensor import as_matrix, as_tensor3


def bernoulli_mask(shape, p, seed=None):
    """Boolean mask with i.i.d. entries that are True with probability ``p``."""
    if not 0.0 <= p <= 1.0:
        raise PreconditionError(f"sampling rate must lie in [0, 1], got {p}")
    rng = np.random.default_rng(seed)
    return rng.random(tuple(shape)) < p


def apply_completion(X, mask):
    X = np.asarray(X)
    mask = np.asarray(mask, dtype=bool)
    if X.shape != mask.shape:
        raise DimensionError(f"mask shape {mask.shape} does not match data {X.shape}")
    return np.where(mask, X, 0.0).astype(X.dtype, copy=False)


def cassi_width(n2, n3, shift):
    return n2 + shift * (n3 - 1)


def cassi_forward(X, mask, shift):
    """Mask every band, shift band k right by ``shift*k`` columns, and sum."""
    X = np.asarray(X)
    mask = np.asarray(mask)
    if X.ndim != 3 or mask.shape != X.shape[:2]:
        raise DimensionError(f"mask shape {mask.shape} does not match bands {X.shape[:2]}")
    if shift < 1:
        raise PreconditionError(f"shift step must be >= 1, got {shift}")
    n1, n2, n3 = X.shape
    out = np.zeros((n1, cassi_width(n2, n3, shift)), dtype=X.dtype)
    for k in range(n3):
        out[:, k * shift:k * shift + n2] += X[:, :, k] * mask
    return out


def cassi_adjoint(B, mask, shift, n3):
    """Transpose of :func:`cassi_forward`: unshift, broadcast to bands, mask."""
    B = np.asarray(B)
    mask = np.asarray(mask)
    n1, n2 = mask.shape
    if B.shape != (n1, cassi_width(n2, n3, shift)):
        raise DimensionError(f"measurement shape {B.shape} inconsistent with mask {mask.shape}, "
                             f"n3={n3}, shift={shift}")
    out = np.empty((n1, n2, n3), dtype=B.dtype)
    for k in range(n3):
        out[:, :, k] = B[:, k * shift:k * shift + n2] * mask
    return out


def add_gaussian_noise(Y, sigma, seed=None):
    if sigma < 0:
        raise PreconditionError(f"sigma must be nonnegative, got {sigma}")
    Y = np.asarray(Y, dtype=np.float64)
    if sigma == 0:
        return Y.copy()
    rng = np.random.default_rng(seed)
    return Y + sigma * rng.standard_normal(Y.shape)


def binary_mask(shape, seed=None):
    """Seeded Bernoulli(0.5) coded aperture as a float 0/1 matrix."""
    return bernoulli_mask(shape, 0.5, seed).astype(np.float64)


def _fidelity(diff, loss_kind):
    if loss_kind == "sq-frobenius":
        return ad.sq_norm(diff)
    if loss_kind == "l1":
        return ad.abs_sum(diff)
    raise ValueError(f"unknown loss kind {loss_kind!r}")


@dataclass(frozen=True)
class Completion:
    """Keep the entries in ``mask`` and zero the rest."""

    mask: np.ndarray
    default_loss = "sq-frobenius"

    def __post_init__(self):
        object.__setattr__(self, "mask", np.asarray(self.mask, dtype=bool))

    def forward(self, X):
        return apply_completion(X, self.mask)

    def observation_shape(self, shape):
        if tuple(shape) != self.mask.shape:
            raise DimensionError(f"mask shape {self.mask.shape} does not match data {tuple(shape)}")
        return tuple(shape)

    def loss(self, X, observation, loss_kind=None):
        """Fidelity between H(X) (a graph node) and the observed data."""
        obs = apply_completion(observation, self.mask)
        return _fidelity(ad.sub(ad.masked(X, self.mask), obs), loss_kind or self.default_loss)


@dataclass(frozen=True)
class Cassi:
    mask: np.ndarray
    shift: int = 2
    default_loss = "sq-frobenius"

    def __post_init__(self):
        object.__setattr__(self, "mask", as_matrix(self.mask, name="CASSI mask"))
        if int(self.shift) != self.shift or self.shift < 1:
            raise PreconditionError(f"shift step must be a positive integer, got {self.shift}")

    def forward(self, X):
        return cassi_forward(X, self.mask, self.shift)

    def adjoint(self, B, n3):
        return cassi_adjoint(B, self.mask, self.shift, n3)

    def observation_shape(self, shape):
        n1, n2, n3 = shape
        if (n1, n2) != self.mask.shape:
            raise DimensionError(f"mask shape {self.mask.shape} does not match bands {(n1, n2)}")
        return (n1, cassi_width(n2, n3, self.shift))

    def loss(self, X, observation, loss_kind=None):
        return _fidelity(ad.sub(ad.cassi(X, self.mask, self.shift), observation),
                         loss_kind or self.default_loss)


@dataclass(frozen=True)
class Noise:
    """Additive Gaussian noise; reconstruction compares X with the noisy cube directly."""

    sigma: float = 0.0
    default_loss = "l1"

    def __post_init__(self):
        if self.sigma < 0:
            raise PreconditionError(f"sigma must be nonnegative, got {self.sigma}")

    def forward(self, X):
        return np.asarray(X)

    def simulate(self, Y, seed=None):
        return add_gaussian_noise(as_tensor3(Y), self.sigma, seed)

    def observation_shape(self, shape):
        return tuple(shape)

    def loss(self, X, observation, loss_kind=None):
        return _fidelity(ad.sub(X, observation), loss_kind or self.default_loss)
