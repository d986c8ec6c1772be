import logging

import numpy as np

from modules.errors import (
    DegenerateVectorError,
    DimensionError,
    DomainError,
    LabelIndexError,
    NumericalError,
)
from modules.numerics.tensor import (
    DTYPE,
    Node,
    Tensor,
    current_graph,
    is_grad_enabled,
)

logger = logging.getLogger(__name__)

EPS_NORM = 1e-12

ELEMENTWISE_KINDS = ("add", "sub", "mul", "relu", "exp", "log", "square", "max-with-scalar")


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(values, inputs, backward_fn, op):
    if not np.all(np.isfinite(values)):
        raise NumericalError(f"{op} produced non-finite values")
    track = is_grad_enabled() and any(t.requires_grad for t in inputs)
    out = Tensor._wrap(values, track)
    if track:
        graph = current_graph()
        node = Node(inputs, out, backward_fn, op)
        graph.record(node)
        out._node = node
        out._graph = graph
        out._generation = graph.generation
    return out


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _check_broadcast(a, b, op):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} are not broadcast-compatible") from None


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim not in (1, 2) or b.ndim != 2 or a.shape[-1] != b.shape[0]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    av, bv = a.values, b.values

    def _backward(g):
        if av.ndim == 1:
            return g @ bv.T, np.outer(av, g)
        return g @ bv.T, av.T @ g

    return _make(av @ bv, (a, b), _backward, "matmul")


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "add")
    sa, sb = a.shape, b.shape
    return _make(a.values + b.values, (a, b),
                 lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)), "add")


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "sub")
    sa, sb = a.shape, b.shape
    return _make(a.values - b.values, (a, b),
                 lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)), "sub")


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "mul")
    av, bv = a.values, b.values
    return _make(av * bv, (a, b),
                 lambda g: (_unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)), "mul")


def relu(x):
    x = as_tensor(x)
    mask = x.values > 0
    return _make(np.where(mask, x.values, 0.0), (x,), lambda g: (g * mask,), "relu")


def exp(x):
    x = as_tensor(x)
    with np.errstate(over="ignore"):
        out = np.exp(x.values)
    if not np.all(np.isfinite(out)):
        raise NumericalError("exp overflowed")
    return _make(out, (x,), lambda g: (g * out,), "exp")


def log(x):
    x = as_tensor(x)
    if np.any(x.values <= 0):
        raise DomainError(f"log of non-positive value (min {x.values.min()!r})")
    xv = x.values
    return _make(np.log(xv), (x,), lambda g: (g / xv,), "log")


def square(x):
    x = as_tensor(x)
    xv = x.values
    return _make(xv * xv, (x,), lambda g: (2.0 * xv * g,), "square")


def maximum_scalar(x, c):
    """max(x, c) with subgradient 0 at ties."""
    x = as_tensor(x)
    c = float(c)
    mask = x.values > c
    return _make(np.where(mask, x.values, c), (x,), lambda g: (g * mask,), "max-with-scalar")


def elementwise(kind, *args):
    if kind == "add":
        return add(*args)
    if kind == "sub":
        return sub(*args)
    if kind == "mul":
        return mul(*args)
    if kind == "relu":
        return relu(*args)
    if kind == "exp":
        return exp(*args)
    if kind == "log":
        return log(*args)
    if kind == "square":
        return square(*args)
    if kind == "max-with-scalar":
        return maximum_scalar(*args)
    raise ValueError(f"unknown elementwise op {kind!r}; expected one of {ELEMENTWISE_KINDS}")


def sum(x, axis=None):
    x = as_tensor(x)
    shape = x.shape

    def _backward(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return _make(np.asarray(x.values.sum(axis=axis), dtype=DTYPE), (x,), _backward, "sum")


def mean(x, axis=None):
    x = as_tensor(x)
    count = x.size if axis is None else x.shape[axis]
    return mul(sum(x, axis=axis), 1.0 / count)


def norm(x):
    """Euclidean norm along the last axis; gradient 0 where the norm is 0."""
    x = as_tensor(x)
    xv = x.values
    n = np.sqrt((xv * xv).sum(axis=-1))

    def _backward(g):
        safe = np.where(n > 0, n, 1.0)
        scale = np.where(n > 0, g / safe, 0.0)
        return (np.expand_dims(scale, -1) * xv,)

    return _make(n, (x,), _backward, "norm")


def l2_normalize(v):
    """Scale `v` (or each row of a matrix) to unit Euclidean norm."""
    v = as_tensor(v)
    vv = v.values
    n = np.sqrt((vv * vv).sum(axis=-1, keepdims=True))
    if np.any(n <= EPS_NORM):
        raise DegenerateVectorError(f"cannot normalize a vector with norm <= {EPS_NORM}")
    y = vv / n

    def _backward(g):
        # (I/|v| - v v^T/|v|^3) g
        return ((g - y * (g * y).sum(axis=-1, keepdims=True)) / n,)

    return _make(y, (v,), _backward, "l2_normalize")


def softmax(values):
    z = values - values.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits, labels):
    """
    -log softmax(logits)[label]. A vector of logits with an int label gives a
    scalar; a [B, n] matrix with B labels gives the B per-sample losses.
    """
    logits = as_tensor(logits)
    lv = logits.values
    n = lv.shape[-1]
    labels_arr = np.asarray(labels, dtype=np.int64)
    if lv.ndim == 1 and labels_arr.ndim != 0:
        raise DimensionError(f"a single logit vector takes one label, got shape {labels_arr.shape}")
    if lv.ndim == 2 and labels_arr.shape != (lv.shape[0],):
        raise DimensionError(f"labels shape {labels_arr.shape} does not match logits {lv.shape}")
    if np.any(labels_arr < 0) or np.any(labels_arr >= n):
        raise LabelIndexError(f"label out of range for {n} classes: {labels_arr.tolist()}")

    z = lv - lv.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=-1))
    one_hot = np.zeros_like(lv)
    if lv.ndim == 1:
        one_hot[labels_arr] = 1.0
        out = lse - z[labels_arr]
    else:
        rows = np.arange(lv.shape[0])
        one_hot[rows, labels_arr] = 1.0
        out = lse - z[rows, labels_arr]
    probs = softmax(lv)

    def _backward(g):
        return ((probs - one_hot) * np.expand_dims(g, -1),)

    return _make(np.asarray(out, dtype=DTYPE), (logits,), _backward, "softmax_cross_entropy")


def take_rows(x, indices):
    x = as_tensor(x)
    idx = np.asarray(indices, dtype=np.int64)
    shape = x.shape

    def _backward(g):
        full = np.zeros(shape, dtype=DTYPE)
        np.add.at(full, idx, g)
        return (full,)

    return _make(x.values[idx], (x,), _backward, "take_rows")


def stack(tensors):
    tensors = tuple(as_tensor(t) for t in tensors)
    shapes = {t.shape for t in tensors}
    if len(shapes) != 1:
        raise DimensionError(f"stack needs equal shapes, got {sorted(shapes)}")
    count = len(tensors)
    return _make(np.stack([t.values for t in tensors]), tensors,
                 lambda g: tuple(g[i] for i in range(count)), "stack")
