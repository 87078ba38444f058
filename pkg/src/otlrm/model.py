"""The generative low-rank model and its training loop.

The reconstruction is

    X = L3^T ( L1(U) face-wise Diag(rho(S)) face-wise L2(V)^T )

where ``L1, L2, L3`` are Householder-chain orthogonal transforms applied along
mode 3, ``rho`` is a small LeakyReLU network acting on the rank dimension of
``S`` and ``Diag`` places each row of ``rho(S)`` on the diagonal of one
frontal slice.  Every slice of ``L3(X)`` therefore has rank at most ``r``.
"""
import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .config import ExperimentConfig
from .errors import DimensionError, NumericError, PreconditionError
from .optim import AdamState, adam_step
from .tensor import identity_tensor

W_RENORM = 1e-6


@dataclass
class OtlrmModel:
    params: dict
    rank: int
    k: int = 2
    slope: float = ad.LEAKY_SLOPE
    lam: float = 1e-8
    beta: float = 0.0
    tie_transforms: bool = False

    def __post_init__(self):
        if self.k < 0:
            raise PreconditionError(f"k must be >= 0, got {self.k}")
        if self.lam < 0 or self.beta < 0:
            raise PreconditionError("lam and beta must be nonnegative")
        n1, n2 = self.params["U"].shape[0], self.params["V"].shape[0]
        if not 1 <= self.rank <= min(n1, n2):
            raise PreconditionError(f"rank {self.rank} outside [1, {min(n1, n2)}]")

    @property
    def shape(self):
        U, V = self.params["U"], self.params["V"]
        return (U.shape[0], V.shape[0], U.shape[2])

    def transforms(self):
        """Materialised matrices (L1, L2, L3)."""
        return _transforms({k: ad.Node(v) for k, v in self.params.items()}, self.tie_transforms,
                           as_values=True)


def g_names(k):
    return [f"G{i}" for i in range(1, k + 1)] if k >= 2 else []


def w_names(tie):
    return ["W"] if tie else ["W1", "W2", "W3"]


def _init_leaf(rng, shape, spec):
    kind, _, arg = spec.partition(":")
    if kind == "kaiming":
        scale = float(arg) if arg else 1.0
        fan_in = int(np.prod(shape[1:])) if len(shape) > 1 else 1
        bound = scale * np.sqrt(6.0 / fan_in)
        return rng.uniform(-bound, bound, size=shape)
    if kind == "uniform":
        return rng.uniform(0.0, float(arg or 1.0), size=shape)
    if kind == "constant":
        return np.full(shape, float(arg or 0.0))
    raise ValueError(f"unknown init scheme {spec!r}")


def init_params(shape, r, k=2, seed=0, scheme="kaiming", tie_transforms=False):
    """Seeded parameters for a model producing a tensor of ``shape``.

    ``scheme`` is either one spec string applied to every leaf except the
    Householder parameters, or a dict mapping leaf names to spec strings.
    Specs: ``"kaiming[:scale]"`` (uniform with variance ``2 scale^2 / fan_in``,
    fan-in being the product of all but the first dimension),
    ``"uniform:a"`` (U(0, a)) and ``"constant:c"``.
    """
    n1, n2, n3 = shape
    if not 1 <= r <= min(n1, n2):
        raise PreconditionError(f"rank {r} outside [1, {min(n1, n2)}]")
    if k < 0:
        raise PreconditionError(f"k must be >= 0, got {k}")
    shapes = {"U": (n1, r, n3), "V": (n2, r, n3), "S": (n3, r)}
    shapes.update({g: (r, r) for g in g_names(k)})
    shapes.update({w: (n3, n3) for w in w_names(tie_transforms)})
    if isinstance(scheme, str):
        specs = {name: (scheme if not name.startswith("W") else "kaiming") for name in shapes}
    else:
        specs = {name: scheme.get(name, "kaiming") for name in shapes}
    # separate stream from the sampling-mask generator, which uses default_rng(seed)
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
    return {name: _init_leaf(rng, s, specs[name]) for name, s in shapes.items()}


def init_model(shape, r, k=2, seed=0, scheme="kaiming", tie_transforms=False, **hyper):
    params = init_params(shape, r, k, seed, scheme, tie_transforms)
    return OtlrmModel(params, r, k, tie_transforms=tie_transforms, **hyper)


# ---------------------------------------------------------------------------
# graph pieces (operate on autodiff nodes)
# ---------------------------------------------------------------------------

def _transforms(p, tie, as_values=False):
    if tie:
        L = ad.householder_chain(p["W"])
        Ls = (L, L, L)
    else:
        Ls = tuple(ad.householder_chain(p[w]) for w in ("W1", "W2", "W3"))
    return tuple(L.value for L in Ls) if as_values else Ls


def _rho(p, k, slope):
    S = p["S"]
    if k == 0:
        return S
    if k == 1:
        return ad.leaky_relu(S, slope)
    Gs = [p[g] for g in g_names(k)]
    out = ad.matmul(S, Gs[0])
    for G in Gs[1:]:
        out = ad.matmul(ad.leaky_relu(out, slope), G)
    return out


def _parts(p, m):
    L1, L2, L3 = _transforms(p, m.tie_transforms)
    U_hat = ad.mode3(p["U"], L1)
    V_hat = ad.mode3(p["V"], L2)
    S_hat = ad.diag_embed(_rho(p, m.k, m.slope))
    core = ad.facewise(ad.facewise(U_hat, S_hat), ad.ftranspose(V_hat))
    X = ad.mode3(core, ad.transpose(L3))
    return X, (L1, L2, L3), U_hat, V_hat


def _otv(U_hat, V_hat, L3):
    return ad.total([
        ad.abs_sum(ad.forward_diff(U_hat, axis=0)),
        ad.abs_sum(ad.forward_diff(V_hat, axis=0)),
        ad.abs_sum(ad.forward_diff(L3, axis=0)),
    ])


def _semi_orth(U_hat, V_hat, L1, L2, beta):
    def gap(F_hat, L):
        r, n3 = F_hat.shape[1], F_hat.shape[2]
        gram = ad.mode3(ad.facewise(ad.ftranspose(F_hat), F_hat), ad.transpose(L))
        return ad.sq_norm(ad.sub(gram, identity_tensor(r, n3)))

    return ad.scale(ad.add(gap(U_hat, L1), gap(V_hat, L2)), beta)


def objective_graph(m, operator, observation, loss_kind=None):
    """Return ``fn(leaves) -> scalar node`` computing the full training objective."""

    def fn(p):
        X, (L1, L2, L3), U_hat, V_hat = _parts(p, m)
        terms = [operator.loss(X, observation, loss_kind)]
        if m.lam > 0:
            terms.append(ad.scale(_otv(U_hat, V_hat, L3), m.lam))
        if m.beta > 0:
            terms.append(_semi_orth(U_hat, V_hat, L1, L2, m.beta))
        return ad.total(terms)

    return fn


# ---------------------------------------------------------------------------
# numpy-facing API
# ---------------------------------------------------------------------------

def rank_estimate(S, Gs=(), slope=ad.LEAKY_SLOPE, k=None):
    """Dense rank estimation ``rho(S)``.

    ``k = 0`` returns ``S``; ``k = 1`` applies one LeakyReLU; ``k >= 2`` uses the
    ``k`` matrices in ``Gs``: ``LReLU(...LReLU(S G1)...) Gk``.
    """
    Gs = list(Gs)
    if k is None:
        k = len(Gs)
    S = np.asarray(S, dtype=np.float64)
    p = {"S": S}
    if k >= 2:
        if len(Gs) != k:
            raise DimensionError(f"k={k} needs {k} rank feature matrices, got {len(Gs)}")
        r = S.shape[1]
        for name, G in zip(g_names(k), Gs):
            if np.shape(G) != (r, r):
                raise DimensionError(f"{name} must be {r}x{r}, got {np.shape(G)}")
            p[name] = np.asarray(G, dtype=np.float64)
    leaves = {n: ad.Node(v) for n, v in p.items()}
    return _rho(leaves, k, slope).value


def _leaves(m):
    return {k: ad.Node(v, name=k) for k, v in m.params.items()}


def reconstruct(m):
    return _parts(_leaves(m), m)[0].value


def otv(m):
    X, (_, _, L3), U_hat, V_hat = _parts(_leaves(m), m)
    return float(_otv(U_hat, V_hat, L3).value)


def semi_orth_penalty(m):
    if m.beta == 0:
        return 0.0
    X, (L1, L2, _), U_hat, V_hat = _parts(_leaves(m), m)
    return float(_semi_orth(U_hat, V_hat, L1, L2, m.beta).value)


def objective(m, operator, observation, loss_kind=None):
    return float(objective_graph(m, operator, observation, loss_kind)(_leaves(m)).value)


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

@dataclass
class FitTrace:
    loss: list = field(default_factory=list)
    psnr: list = field(default_factory=list)  # (iteration, dB)
    wall_seconds: float = 0.0

    @property
    def iterations(self):
        return len(self.loss)


def renormalize_columns(W, floor=W_RENORM):
    """Rescale columns with norm below ``floor`` to unit norm (leaves L unchanged)."""
    norms = np.linalg.norm(W, axis=0)
    small = norms < floor
    if small.any():
        if np.any(norms[small] == 0):
            raise NumericError("a Householder column collapsed to exactly zero")
        W[:, small] /= norms[small]
    return W


def fit(config, operator, observation, truth=None, shape=None, callback=None):
    """Fit the model to ``observation`` by Adam; returns (reconstruction, FitTrace).

    ``callback(t, model)`` runs after every update.
    ``shape`` is the (n1, n2, n3) of the unknown tensor; it defaults to the
    observation's shape (needed explicitly for CASSI).
    """
    from .metrics import psnr

    if not isinstance(config, ExperimentConfig):
        config = ExperimentConfig.from_dict(dict(config))
    dtype = np.float32 if config.precision == "f32" else np.float64
    observation = np.asarray(observation, dtype=dtype)
    if shape is None:
        shape = observation.shape
    shape = tuple(int(s) for s in shape)
    if len(shape) != 3:
        raise DimensionError(f"target shape must be 3-D, got {shape}")
    if tuple(operator.observation_shape(shape)) != observation.shape:
        raise DimensionError(
            f"observation shape {observation.shape} does not match operator output "
            f"{operator.observation_shape(shape)}"
        )
    r = config.resolved_rank(shape)
    m = init_model(shape, r, config.k, config.seed, config.init, config.tie_transforms,
                   slope=config.slope, lam=config.lam, beta=config.beta)
    m.params = {k: v.astype(dtype) for k, v in m.params.items()}
    fn = objective_graph(m, operator, observation, config.loss_kind)
    state = AdamState(lr=config.lr)
    trace = FitTrace()
    w_keys = [k for k in m.params if k.startswith("W")]
    start = time.perf_counter()
    for t in range(config.t_max):
        try:
            loss, grads = ad.value_and_grad(fn, m.params)
        except NumericError as exc:
            raise NumericError(f"iteration {t}: {exc}") from exc
        if not np.isfinite(loss):
            raise NumericError(f"iteration {t}: non-finite loss {loss}")
        grads = {k: g.astype(dtype, copy=False) for k, g in grads.items()}
        if config.lr_schedule == "cosine":
            state.lr = config.lr * 0.5 * (1.0 + np.cos(np.pi * t / config.t_max))
        adam_step(m.params, grads, state)
        for k in w_keys:
            renormalize_columns(m.params[k])
        trace.loss.append(loss)
        if truth is not None and config.eval_every and (t + 1) % config.eval_every == 0:
            trace.psnr.append((t + 1, psnr(reconstruct(m), truth)[1]))
        if callback is not None:
            callback(t, m)
    X = reconstruct(m)
    trace.wall_seconds = time.perf_counter() - start
    return X, trace
