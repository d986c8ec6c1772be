"""
Reverse-mode differentiation core: `Tensor`, `ComputeGraph` and `backward`.

Every differentiable op (see `ops.py`) records a `Node` on the calling thread's
graph. `backward(loss)` walks those nodes in exact reverse of recording order,
keeps intermediate gradients in a transient table and accumulates into the
`grad` buffers of leaf tensors, so several losses can be back-propagated
before one optimizer step.
"""

import threading
import logging
from contextlib import contextmanager

import numpy as np

from modules.errors import ContractError, GraphError

logger = logging.getLogger(__name__)

DTYPE = np.float64

_local = threading.local()


class Node:
    __slots__ = ("inputs", "output", "backward_fn", "op", "index")

    def __init__(self, inputs, output, backward_fn, op):
        self.inputs = inputs
        self.output = output
        self.backward_fn = backward_fn
        self.op = op
        self.index = -1


class ComputeGraph:
    """Ordered record of the ops applied since the last reset."""

    def __init__(self):
        self.nodes = []
        self.generation = 0

    def record(self, node):
        node.index = len(self.nodes)
        self.nodes.append(node)

    def reset(self):
        self.nodes = []
        self.generation += 1

    def __len__(self):
        return len(self.nodes)


def current_graph():
    graph = getattr(_local, "graph", None)
    if graph is None:
        graph = ComputeGraph()
        _local.graph = graph
    return graph


def reset_graph():
    current_graph().reset()


def is_grad_enabled():
    return getattr(_local, "grad_enabled", True)


@contextmanager
def no_grad():
    previous = is_grad_enabled()
    _local.grad_enabled = False
    try:
        yield
    finally:
        _local.grad_enabled = previous


class Tensor:
    __slots__ = ("values", "requires_grad", "grad", "grad_touched",
                 "_node", "_graph", "_generation", "_backward_done")

    def __init__(self, values, requires_grad=False):
        self.values = np.array(values, dtype=DTYPE)
        self.requires_grad = bool(requires_grad)
        self.grad = np.zeros_like(self.values) if self.requires_grad else None
        self.grad_touched = False
        self._node = None
        self._graph = None
        self._generation = -1
        self._backward_done = False

    @classmethod
    def _wrap(cls, values, requires_grad):
        out = cls.__new__(cls)
        out.values = values
        out.requires_grad = requires_grad
        out.grad = np.zeros_like(values) if requires_grad else None
        out.grad_touched = False
        out._node = None
        out._graph = None
        out._generation = -1
        out._backward_done = False
        return out

    @property
    def shape(self):
        return self.values.shape

    @property
    def size(self):
        return self.values.size

    @property
    def ndim(self):
        return self.values.ndim

    def item(self):
        if self.values.size != 1:
            raise ContractError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.values.reshape(()))

    def numpy(self):
        return self.values.copy()

    def detach(self):
        return Tensor._wrap(self.values, False)

    def zero_grad(self):
        if self.requires_grad:
            self.grad = np.zeros_like(self.values)
        self.grad_touched = False

    def _accumulate(self, g):
        self.grad += g
        self.grad_touched = True

    def backward(self):
        backward(self)

    # operator sugar; the op implementations live in ops.py
    def __add__(self, other):
        from modules.numerics import ops
        return ops.add(self, other)

    def __radd__(self, other):
        from modules.numerics import ops
        return ops.add(other, self)

    def __sub__(self, other):
        from modules.numerics import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from modules.numerics import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from modules.numerics import ops
        return ops.mul(self, other)

    def __rmul__(self, other):
        from modules.numerics import ops
        return ops.mul(other, self)

    def __neg__(self):
        from modules.numerics import ops
        return ops.mul(self, -1.0)

    def __matmul__(self, other):
        from modules.numerics import ops
        return ops.matmul(self, other)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def backward(loss):
    """Accumulate d(loss)/d(leaf) into every reachable leaf that requires grad."""
    if loss.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise GraphError("loss does not depend on any tensor that requires grad")
    if loss._backward_done:
        raise GraphError("backward already ran for this loss; run a new forward pass first")

    seed = np.ones_like(loss.values)
    if loss._node is None:
        loss._accumulate(seed)
        loss._backward_done = True
        return

    graph = loss._graph
    if graph is None or loss._generation != graph.generation:
        raise GraphError("the forward graph of this loss was reset before backward")

    pending = {id(loss): seed}
    nodes = graph.nodes
    for i in range(loss._node.index, -1, -1):
        node = nodes[i]
        out = node.output
        g = pending.pop(id(out), None)
        if g is None:
            continue
        out.grad = g
        out.grad_touched = True
        for inp, ig in zip(node.inputs, node.backward_fn(g)):
            if ig is None or not inp.requires_grad:
                continue
            if inp._node is None:
                inp._accumulate(ig)
            else:
                key = id(inp)
                pending[key] = pending[key] + ig if key in pending else ig
    loss._backward_done = True
