# src/engine/tensor.py
import contextvars
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..utils.errors import GraphError, NonFiniteError

_ACTIVE_GRAPH: contextvars.ContextVar = contextvars.ContextVar("active_graph", default=None)


class Tensor:
    """Immutable dense array; the value type flowing through every op"""

    __slots__ = ("data", "requires_grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None,
                 dtype=None):
        if dtype is None:
            source = np.asarray(data)
            dtype = source.dtype if np.issubdtype(source.dtype, np.floating) else np.float64
        array = np.array(data, dtype=dtype)
        array.setflags(write=False)
        self.data = array
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        label = f" {self.name}" if self.name else ""
        return f"<Tensor{label} shape={self.shape} dtype={self.dtype} requires_grad={self.requires_grad}>"

    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    def __radd__(self, other):
        from . import ops
        return ops.add(self, other)

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    def __rmul__(self, other):
        from . import ops
        return ops.mul(self, other)

    def __neg__(self):
        from . import ops
        return ops.scale(self, -1.0)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)


@dataclass
class Node:
    op: str
    inputs: Tuple[Tensor, ...]
    output: Tensor
    backward: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Graph:
    """Define-by-run tape of executed ops.

    Ops executed inside ``with Graph() as graph:`` are appended in execution order;
    outside any graph they run forward-only.
    """

    def __init__(self):
        self.nodes: List[Node] = []
        self.consumed = False
        self._token = None

    def __enter__(self):
        if self.consumed or self.nodes:
            raise GraphError("a graph records exactly one forward pass")
        self._token = _ACTIVE_GRAPH.set(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        _ACTIVE_GRAPH.reset(self._token)
        self._token = None
        return False

    def record(self, node: Node):
        if self.consumed:
            raise GraphError("cannot record into a graph that has already run backward")
        self.nodes.append(node)

    @property
    def op_names(self) -> List[str]:
        return [node.op for node in self.nodes]


def current_graph() -> Optional[Graph]:
    return _ACTIVE_GRAPH.get()


class Function:
    """One differentiable op: `forward` on raw arrays, `backward` returns input grads"""

    def __init__(self, *parents: Tensor, **attrs):
        self.parents = parents
        for key, value in attrs.items():
            setattr(self, key, value)

    @classmethod
    def apply(cls, *inputs: Tensor, **attrs) -> Tensor:
        fn = cls(*inputs, **attrs)
        out = fn.forward(*[t.data for t in inputs])
        if not np.isfinite(out).all():
            raise NonFiniteError(cls.__name__)
        graph = current_graph()
        tracked = graph is not None and any(t.requires_grad for t in inputs)
        result = Tensor(out, requires_grad=tracked, dtype=out.dtype)
        if tracked:
            graph.record(Node(cls.__name__, tuple(inputs), result, fn.backward))
        return result

    def forward(self, *arrays: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        raise NotImplementedError


def backward(loss: Tensor, graph: Graph) -> Dict[Tensor, np.ndarray]:
    """Reverse-mode sweep over `graph`; returns dLoss/dLeaf for every leaf that requires grad"""
    if graph.consumed:
        raise GraphError("backward already ran on this graph; run a new forward pass")
    if loss.shape != ():
        raise GraphError(f"loss must be a scalar, got shape {loss.shape}")
    produced = {id(node.output) for node in graph.nodes}
    if id(loss) not in produced:
        raise GraphError("loss was not produced inside this graph")
    graph.consumed = True

    leaves: Dict[int, Tensor] = {}
    for node in graph.nodes:
        for tensor in node.inputs:
            if tensor.requires_grad and id(tensor) not in produced:
                leaves.setdefault(id(tensor), tensor)

    grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(graph.nodes):
        grad = grads.pop(id(node.output), None)
        if grad is None:
            continue
        for tensor, input_grad in zip(node.inputs, node.backward(grad)):
            if input_grad is None or not tensor.requires_grad:
                continue
            key = id(tensor)
            grads[key] = input_grad if key not in grads else grads[key] + input_grad

    return {
        tensor: grads.get(key, np.zeros_like(tensor.data))
        for key, tensor in leaves.items()
    }
