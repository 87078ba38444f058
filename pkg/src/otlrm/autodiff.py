"""A small reverse-mode differentiation tape for the model's fixed op vocabulary.

Graphs are built by calling the functions in this module on :class:`Node`
objects (plain arrays are treated as constants).  Anything outside the
vocabulary, such as a numpy ufunc applied to a node, raises
:class:`~otlrm.errors.UnsupportedOpError` when the graph is built.

>>> f = lambda p: sq_norm(p["x"])
>>> value, grads = value_and_grad(f, {"x": np.array([1.0, 2.0])})
>>> value, grads["x"]
(5.0, array([2., 4.]))
"""
import numpy as np

from . import kernels
from .errors import DimensionError, NumericError, UnsupportedOpError
from .ortho import check_columns
from .tensor import diag_embed as _diag_embed
from .tensor import facewise_product as _facewise
from .tensor import facewise_transpose as _ftranspose
from .tensor import mode3_product as _mode3

LEAKY_SLOPE = 0.01


class Node:
    """A value in the computation graph together with how to back-propagate through it."""

    __slots__ = ("value", "parents", "vjp", "op", "kink", "name")

    def __init__(self, value, parents=(), vjp=None, op="leaf", name=None):
        self.value = value
        self.parents = parents
        self.vjp = vjp
        self.op = op
        self.kink = None
        self.name = name

    @property
    def shape(self):
        return np.shape(self.value)

    def __repr__(self):
        label = self.name or self.op
        return f"Node({label}, shape={self.shape})"

    def __array_ufunc__(self, ufunc, method, *inputs, **kwargs):
        # numpy scalars on the left of +, -, * land here
        if method == "__call__" and not kwargs and len(inputs) == 2:
            a, b = inputs
            if ufunc is np.add:
                return add(a, b)
            if ufunc is np.subtract:
                return sub(a, b)
            if ufunc is np.multiply and np.ndim(a) == 0 and not isinstance(a, Node):
                return scale(b, float(a))
        raise UnsupportedOpError(f"'{ufunc.__name__}' is not a differentiable op")

    def __array_function__(self, func, types, args, kwargs):
        raise UnsupportedOpError(f"'{func.__name__}' is not a differentiable op")

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __neg__(self):
        return scale(self, -1.0)

    def __mul__(self, c):
        if isinstance(c, Node) or np.ndim(c) != 0:
            raise UnsupportedOpError("only multiplication by a scalar constant is supported")
        return scale(self, float(c))

    __rmul__ = __mul__


def _array(x):
    x = np.asarray(x)
    return x if np.issubdtype(x.dtype, np.floating) else x.astype(np.float64)


def _wrap(x):
    return x if isinstance(x, Node) else Node(_array(x), op="const")


def _make(value, parents, vjp, op):
    if not np.all(np.isfinite(value)):
        raise NumericError(f"non-finite value produced by op '{op}'")
    return Node(value, parents, vjp, op)


# ---------------------------------------------------------------------------
# op vocabulary
# ---------------------------------------------------------------------------

def add(a, b):
    a, b = _wrap(a), _wrap(b)
    return _make(a.value + b.value, (a, b), lambda g: (g, g), "add")


def sub(a, b):
    a, b = _wrap(a), _wrap(b)
    return _make(a.value - b.value, (a, b), lambda g: (g, -g), "sub")


def scale(a, c):
    a = _wrap(a)
    return _make(c * a.value, (a,), lambda g: (c * g,), "scale")


def total(terms):
    """Sum of scalar nodes, accumulated left to right."""
    out = terms[0]
    for t in terms[1:]:
        out = add(out, t)
    return out


def matmul(A, B):
    A, B = _wrap(A), _wrap(B)
    if A.value.ndim != 2 or B.value.ndim != 2 or A.shape[1] != B.shape[0]:
        raise DimensionError(f"matmul shapes {A.shape} and {B.shape} do not conform")
    return _make(A.value @ B.value, (A, B),
                 lambda g: (g @ B.value.T, A.value.T @ g), "matmul")


def transpose(A):
    A = _wrap(A)
    return _make(A.value.T, (A,), lambda g: (g.T,), "transpose")


def mode3(X, M):
    """Mode-3 product ``X x_3 M``."""
    X, M = _wrap(X), _wrap(M)
    out = _mode3(X.value, M.value)

    def vjp(g):
        n = X.shape[2]
        gX = g @ M.value
        gM = g.reshape(-1, g.shape[2]).T @ X.value.reshape(-1, n)
        return gX, gM

    return _make(out, (X, M), vjp, "mode3_product")


def householder_chain(W):
    """Orthogonal matrix ``F_1 ... F_n`` from the columns of ``W``."""
    W = _wrap(W)
    w = np.ascontiguousarray(W.value)
    check_columns(w)
    L, prefixes = kernels.chain_forward(w)
    return _make(L, (W,), lambda g: (kernels.chain_backward(w, prefixes, np.ascontiguousarray(g)),),
                 "householder_chain")


def facewise(A, B):
    A, B = _wrap(A), _wrap(B)
    out = _facewise(A.value, B.value)
    return _make(out, (A, B),
                 lambda g: (_facewise(g, _ftranspose(B.value)), _facewise(_ftranspose(A.value), g)),
                 "facewise_product")


def ftranspose(A):
    A = _wrap(A)
    return _make(_ftranspose(A.value), (A,), lambda g: (_ftranspose(g),), "facewise_transpose")


def diag_embed(S):
    S = _wrap(S)
    r = S.shape[1]
    idx = np.arange(r)
    return _make(_diag_embed(S.value), (S,), lambda g: (g[idx, idx, :].T.copy(),), "diag_embed")


def leaky_relu(x, slope=LEAKY_SLOPE):
    x = _wrap(x)
    v = x.value
    d = np.where(v >= 0, 1.0, slope).astype(v.dtype)
    node = _make(v * d, (x,), lambda g: (g * d,), "leaky_relu")
    node.kink = float(np.abs(v).min()) if v.size else np.inf
    return node


def abs_sum(x):
    """Sum of absolute values; the subgradient at 0 is 0."""
    x = _wrap(x)
    v = x.value
    sg = np.sign(v)
    node = _make(np.abs(v).sum(), (x,), lambda g: (g * sg,), "abs_sum")
    node.kink = float(np.abs(v).min()) if v.size else np.inf
    return node


def sq_norm(x):
    """Squared Frobenius norm."""
    x = _wrap(x)
    v = x.value
    return _make((v * v).sum(), (x,), lambda g: (2.0 * g * v,), "sq_norm")


def masked(x, mask):
    x = _wrap(x)
    m = np.asarray(mask, dtype=x.value.dtype)
    return _make(x.value * m, (x,), lambda g: (g * m,), "masked")


def forward_diff(x, axis=0):
    """First-order forward differences along ``axis`` without wraparound."""
    x = _wrap(x)
    out = np.diff(x.value, axis=axis)

    def vjp(g):
        pad = [(0, 0)] * g.ndim
        pad[axis] = (1, 0)
        gp = np.pad(g, pad)
        pad[axis] = (0, 1)
        return (gp - np.pad(g, pad),)

    return _make(out, (x,), vjp, "forward_diff")


def cassi(x, mask, shift):
    """Shift-mask-sum CASSI measurement (adjoint used for back-propagation)."""
    from .operators import cassi_adjoint, cassi_forward

    x = _wrap(x)
    out = cassi_forward(x.value, mask, shift)
    return _make(out, (x,), lambda g: (cassi_adjoint(g, mask, shift, x.shape[2]),), "cassi")


# ---------------------------------------------------------------------------
# reverse pass
# ---------------------------------------------------------------------------

def _toposort(out):
    order, seen = [], set()
    stack = [(out, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in reversed(node.parents):
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(out, seed=1.0):
    """Propagate ``seed`` from ``out`` to every node; returns {id(node): gradient}."""
    grads = {id(out): np.asarray(seed, dtype=np.result_type(out.value, np.float32)) * np.ones_like(out.value)}
    for node in reversed(_toposort(out)):
        g = grads.get(id(node))
        if g is None or node.vjp is None:
            continue
        for parent, pg in zip(node.parents, node.vjp(g)):
            if parent.op == "const":
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg
    return grads


def kink_margin(out):
    """Smallest distance of any abs/LeakyReLU argument from its kink."""
    margins = [n.kink for n in _toposort(out) if n.kink is not None]
    return min(margins) if margins else np.inf


def value_and_grad(fn, params, seed=1.0):
    """Evaluate scalar ``fn(leaves)`` and its gradient with respect to each leaf.

    ``params`` maps names to arrays; ``fn`` receives the same mapping with
    :class:`Node` leaves and must return a scalar node.
    """
    leaves = {k: Node(_array(v), name=k) for k, v in params.items()}
    out = fn(leaves)
    if not isinstance(out, Node) or np.ndim(out.value) != 0:
        raise DimensionError("objective must return a scalar node")
    grads = backward(out, seed)
    result = {}
    for k, leaf in leaves.items():
        g = grads.get(id(leaf))
        result[k] = np.zeros_like(leaf.value) if g is None else g
    return float(out.value), result


def evaluate(fn, params):
    leaves = {k: Node(_array(v), name=k) for k, v in params.items()}
    return fn(leaves)


def grad_check(fn, params, h=1e-6, probes=50, rng=None, grads=None):
    """Worst relative error between analytic and central-difference gradients.

    Probes ``probes`` coordinates drawn uniformly over all leaves (with
    replacement).  Relative error uses ``max(|a|, |b|, 1e-8)`` as denominator.
    """
    rng = np.random.default_rng(rng)
    params = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    if grads is None:
        _, grads = value_and_grad(fn, params)
    names = list(params)
    sizes = np.array([params[k].size for k in names])
    flat = rng.integers(0, sizes.sum(), size=probes)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    worst = 0.0
    for f in flat:
        li = int(np.searchsorted(offsets, f, side="right") - 1)
        name, idx = names[li], int(f - offsets[li])
        worst = max(worst, _probe(fn, params, grads, name, idx, h))
    return worst


def _probe(fn, params, grads, name, idx, h):
    arr = params[name].reshape(-1)
    orig = arr[idx]
    arr[idx] = orig + h
    fp = float(evaluate(fn, params).value)
    arr[idx] = orig - h
    fm = float(evaluate(fn, params).value)
    arr[idx] = orig
    numeric = (fp - fm) / (2.0 * h)
    analytic = float(grads[name].reshape(-1)[idx])
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)


def grad_check_directions(fn, params, h=1e-6, directions=50, rng=None, grads=None):
    """Worst relative error of directional derivatives along random unit directions."""
    rng = np.random.default_rng(rng)
    params = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    if grads is None:
        _, grads = value_and_grad(fn, params)
    worst = 0.0
    for _ in range(directions):
        d = {k: rng.standard_normal(v.shape) for k, v in params.items()}
        nrm = np.sqrt(sum((x * x).sum() for x in d.values()))
        d = {k: x / nrm for k, x in d.items()}
        fp = float(evaluate(fn, {k: params[k] + h * d[k] for k in params}).value)
        fm = float(evaluate(fn, {k: params[k] - h * d[k] for k in params}).value)
        numeric = (fp - fm) / (2.0 * h)
        analytic = float(sum((grads[k] * d[k]).sum() for k in params))
        worst = max(worst, abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8))
    return worst


def grad_check_all(fn, params, h=1e-6, grads=None):
    """Like :func:`grad_check` but probes every coordinate once."""
    params = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    if grads is None:
        _, grads = value_and_grad(fn, params)
    worst, count = 0.0, 0
    for name in params:
        for idx in range(params[name].size):
            worst = max(worst, _probe(fn, params, grads, name, idx, h))
            count += 1
    return worst, count
