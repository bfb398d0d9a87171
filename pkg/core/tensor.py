"""
Dense float64 tensors with reverse-mode automatic differentiation.

Every op that touches a tensor requiring gradients records an `OpRecord`
on its output. `backward()` orders the reachable records topologically
(the `ComputationGraph`), runs their backward closures in reverse and
then consumes the graph unless `retain_graph` is requested.
"""
import threading
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Iterator, Optional, Sequence, Union

import numpy as np
import scipy.sparse

ArrayLike = Union[np.ndarray, float, int, Sequence[float]]
BackwardFn = Callable[[np.ndarray], tuple[Optional[np.ndarray], ...]]


class DimensionError(Exception):
    """Raised when operand shapes violate an op's shape contract."""
    pass


class GraphUsageError(Exception):
    """Raised on a non-scalar backward or a backward through a consumed graph."""
    pass


_local = threading.local()


def is_grad_enabled() -> bool:
    return getattr(_local, "grad_enabled", True)


@contextmanager
def no_grad() -> Iterator[None]:
    """Disable graph recording on the current thread."""
    previous = is_grad_enabled()
    _local.grad_enabled = False
    try:
        yield
    finally:
        _local.grad_enabled = previous


@dataclass(eq=False)
class OpRecord:
    op: str
    inputs: tuple["Tensor", ...]
    backward: Optional[BackwardFn]
    consumed: bool = False


class Tensor:
    """
    A dense row-major float64 array with an optional gradient slot.

    Leaves created with `requires_grad=True` carry a zero-initialised
    `grad` array that `backward()` accumulates into.
    """

    def __init__(self, data: ArrayLike, requires_grad: bool = False):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = np.zeros_like(self.data) if requires_grad else None
        self._record: Optional[OpRecord] = None

    @classmethod
    def _from_op(cls, data: np.ndarray, op: str, inputs: tuple["Tensor", ...], backward_fn: BackwardFn) -> "Tensor":
        out = cls.__new__(cls)
        out.data = np.asarray(data, dtype=np.float64)
        out.grad = None
        out.requires_grad = is_grad_enabled() and any(t.requires_grad for t in inputs)
        out._record = OpRecord(op, inputs, backward_fn) if out.requires_grad else None
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return self._record is None

    def item(self) -> float:
        if self.size != 1:
            raise DimensionError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        if self.requires_grad and self.is_leaf:
            self.grad = np.zeros_like(self.data)

    def backward(self, retain_graph: bool = False) -> None:
        backward(self, retain_graph=retain_graph)

    def __add__(self, other): return add(self, other)
    def __radd__(self, other): return add(other, self)
    def __sub__(self, other): return sub(self, other)
    def __rsub__(self, other): return sub(other, self)
    def __mul__(self, other): return mul(self, other)
    def __rmul__(self, other): return mul(other, self)
    def __neg__(self): return scale(self, -1.0)
    def __matmul__(self, other): return matmul(self, other)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


TensorLike = Union[Tensor, float, int]


def as_tensor(value: Union[TensorLike, np.ndarray]) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


# ============ Graph ============

class ComputationGraph:
    """Op records reachable from an output, ordered inputs-first."""

    def __init__(self, nodes: list[Tensor]):
        self.nodes = nodes

    @classmethod
    def from_output(cls, output: Tensor) -> "ComputationGraph":
        order: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(output, False)]
        while stack:
            node, expanded = stack.pop()
            if node._record is None:
                continue
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            if node._record.consumed:
                raise GraphUsageError(
                    f"graph through '{node._record.op}' was already consumed by backward(); "
                    "pass retain_graph=True to backpropagate twice"
                )
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._record.inputs:
                if parent._record is not None and id(parent) not in visited:
                    stack.append((parent, False))
        return cls(order)

    def release(self) -> None:
        for node in self.nodes:
            node._record.consumed = True
            node._record.backward = None
            node._record.inputs = ()


def backward(loss: Tensor, retain_graph: bool = False) -> None:
    """Populate `.grad` of every requires_grad leaf reachable from a scalar loss."""
    if loss.ndim != 0:
        raise GraphUsageError(f"backward() needs a scalar loss, got shape {loss.shape}")
    if loss._record is None:
        if loss.requires_grad:
            loss.grad += 1.0
        return

    graph = ComputationGraph.from_output(loss)
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(graph.nodes):
        upstream = grads.pop(id(node), None)
        if upstream is None:
            continue
        input_grads = node._record.backward(upstream)
        for parent, grad in zip(node._record.inputs, input_grads):
            if grad is None or not parent.requires_grad:
                continue
            if parent._record is None:
                parent.grad += grad
            elif id(parent) in grads:
                grads[id(parent)] = grads[id(parent)] + grad
            else:
                grads[id(parent)] = grad

    if not retain_graph:
        graph.release()


# ============ Elementwise ============

def _check_elementwise(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape and a.ndim != 0 and b.ndim != 0:
        raise DimensionError(f"{op}: incompatible shapes {a.shape} and {b.shape}")


def _reduce_to(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    return np.asarray(grad.sum()) if shape == () and grad.shape != () else grad


def add(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_elementwise("add", a, b)
    return Tensor._from_op(
        a.data + b.data, "add", (a, b),
        lambda g: (_reduce_to(g, a.shape), _reduce_to(g, b.shape)),
    )


def sub(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_elementwise("sub", a, b)
    return Tensor._from_op(
        a.data - b.data, "sub", (a, b),
        lambda g: (_reduce_to(g, a.shape), _reduce_to(-g, b.shape)),
    )


def mul(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_elementwise("mul", a, b)
    return Tensor._from_op(
        a.data * b.data, "mul", (a, b),
        lambda g: (_reduce_to(g * b.data, a.shape), _reduce_to(g * a.data, b.shape)),
    )


def scale(x: Tensor, factor: Union[float, np.ndarray]) -> Tensor:
    """Multiply by a constant; array factors may broadcast into x but never expand it."""
    factor = np.asarray(factor, dtype=np.float64)
    if factor.ndim and np.broadcast_shapes(x.shape, factor.shape) != x.shape:
        raise DimensionError(f"scale: factor shape {factor.shape} does not fit {x.shape}")
    return Tensor._from_op(x.data * factor, "scale", (x,), lambda g: (g * factor,))


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return Tensor._from_op(np.where(mask, x.data, 0.0), "relu", (x,), lambda g: (g * mask,))


def clamp(x: Tensor, lo: float, hi: float) -> Tensor:
    inside = (x.data > lo) & (x.data < hi)
    return Tensor._from_op(np.clip(x.data, lo, hi), "clamp", (x,), lambda g: (g * inside,))


def sign(x: Tensor) -> Tensor:
    return Tensor._from_op(np.sign(x.data), "sign", (x,), lambda g: (np.zeros_like(g),))


def sin(x: Tensor) -> Tensor:
    return Tensor._from_op(np.sin(x.data), "sin", (x,), lambda g: (g * np.cos(x.data),))


def cos(x: Tensor) -> Tensor:
    return Tensor._from_op(np.cos(x.data), "cos", (x,), lambda g: (-g * np.sin(x.data),))


ELEMENTWISE_OPS: dict[str, Callable[..., Tensor]] = {
    "add": add,
    "sub": sub,
    "mul": mul,
    "relu": relu,
    "clamp": clamp,
    "sign": sign,
    "sin": sin,
    "cos": cos,
    "scale": scale,
}


def elementwise(op: str, *args, **kwargs) -> Tensor:
    if op not in ELEMENTWISE_OPS:
        raise ValueError(f"Unknown elementwise op: {op}")
    return ELEMENTWISE_OPS[op](*args, **kwargs)


# ============ Linear algebra ============

def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    return Tensor._from_op(
        a.data @ b.data, "matmul", (a, b),
        lambda g: (g @ b.data.T, a.data.T @ g),
    )


def linear(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """x @ weight + bias, with the bias row added to every row of the product."""
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[0]:
        raise DimensionError(f"linear: cannot multiply {x.shape} by {weight.shape}")
    if bias.shape != (weight.shape[1],):
        raise DimensionError(f"linear: bias shape {bias.shape} does not match {weight.shape[1]} outputs")
    return Tensor._from_op(
        x.data @ weight.data + bias.data, "linear", (x, weight, bias),
        lambda g: (g @ weight.data.T, x.data.T @ g, g.sum(axis=0)),
    )


def spmm(matrix: scipy.sparse.spmatrix, x: Tensor) -> Tensor:
    """Constant sparse matrix times a dense 2-D tensor."""
    if x.ndim != 2 or matrix.shape[1] != x.shape[0]:
        raise DimensionError(f"spmm: cannot multiply {matrix.shape} by {x.shape}")
    matrix = scipy.sparse.csr_matrix(matrix)
    return Tensor._from_op(
        np.asarray(matrix @ x.data), "spmm", (x,),
        lambda g: (np.asarray(matrix.T @ g),),
    )


# ============ Shape ============

def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    try:
        out = x.data.reshape(shape)
    except ValueError as e:
        raise DimensionError(f"reshape: {e}")
    return Tensor._from_op(out, "reshape", (x,), lambda g: (g.reshape(x.shape),))


def expand(x: Tensor, shape: Sequence[int]) -> Tensor:
    """Explicitly repeat x over new leading axes; backward sums them out."""
    shape = tuple(shape)
    lead = len(shape) - x.ndim
    if lead < 0 or shape[lead:] != x.shape:
        raise DimensionError(f"expand: cannot expand {x.shape} to {shape}")
    axes = tuple(range(lead))
    return Tensor._from_op(
        np.broadcast_to(x.data, shape).copy(), "expand", (x,),
        lambda g: (g.sum(axis=axes),),
    )


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = tuple(as_tensor(t) for t in tensors)
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as e:
        raise DimensionError(f"concat: {e}")
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return Tensor._from_op(
        out, "concat", tensors,
        lambda g: tuple(np.split(g, bounds, axis=axis)),
    )


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = tuple(as_tensor(t) for t in tensors)
    try:
        out = np.stack([t.data for t in tensors], axis=axis)
    except ValueError as e:
        raise DimensionError(f"stack: {e}")
    return Tensor._from_op(
        out, "stack", tensors,
        lambda g: tuple(np.take(g, i, axis=axis) for i in range(len(tensors))),
    )


# ============ Reductions ============

def reduce_sum(x: Tensor, axis: Union[None, int, tuple[int, ...]] = None) -> Tensor:
    def _backward(g: np.ndarray):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return Tensor._from_op(x.data.sum(axis=axis), "sum", (x,), _backward)


def mean(x: Tensor, axis: Union[None, int, tuple[int, ...]] = None) -> Tensor:
    count = x.size if axis is None else int(np.prod([x.shape[a] for a in np.atleast_1d(axis)]))
    return scale(reduce_sum(x, axis=axis), 1.0 / count)


def mse(a: Tensor, b: Tensor) -> Tensor:
    """Mean of squared differences; a scalar tensor."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise DimensionError(f"mse: shape mismatch {a.shape} vs {b.shape}")
    diff = a.data - b.data
    n = max(diff.size, 1)
    return Tensor._from_op(
        np.asarray(np.mean(diff ** 2)), "mse", (a, b),
        lambda g: (2.0 * g * diff / n, -2.0 * g * diff / n),
    )
