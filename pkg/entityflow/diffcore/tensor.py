"""Tensors and the recording tape for reverse-mode differentiation.

Operations are recorded only while a :class:`Tape` is active. Code that runs
outside a tape (scoring, validation, graph export) builds no graph and keeps
no saved activations.
"""

import threading
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from entityflow.core.exceptions import DimensionError, NumericError, UsageError

_local = threading.local()

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


def _tape_stack() -> List["Tape"]:
    stack = getattr(_local, "tapes", None)
    if stack is None:
        stack = _local.tapes = []
    return stack


def active_tape() -> Optional["Tape"]:
    """Return the innermost active tape of the calling thread, if any."""
    stack = _tape_stack()
    return stack[-1] if stack else None


class TapeNode:
    """One recorded operation: kind, inputs, output and backward rule.

    The backward rule closes over the activations the gradient needs.
    """

    __slots__ = ("op", "inputs", "output", "backward_fn")

    def __init__(self, op: str, inputs: Tuple["Tensor", ...], output: "Tensor", backward_fn: BackwardFn):
        self.op = op
        self.inputs = inputs
        self.output = output
        self.backward_fn = backward_fn

    def __repr__(self) -> str:
        shapes = ", ".join(str(t.shape) for t in self.inputs)
        return f"TapeNode(op={self.op}, inputs=[{shapes}])"


class Tape:
    """
    Records operations in execution order.

    Execution order is already a topological order of the graph, so the
    backward pass replays the nodes in reverse without sorting.

    Example:
        >>> w = Tensor([[1.0, 2.0]], requires_grad=True)
        >>> with Tape() as tape:
        ...     loss = (w * w).sum()
        >>> tape.backward(loss)
        >>> w.grad
        array([[2., 4.]])
    """

    def __init__(self):
        self.nodes: List[TapeNode] = []

    def __enter__(self) -> "Tape":
        _tape_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> bool:
        _tape_stack().pop()
        return False

    def record(self, node: TapeNode) -> None:
        self.nodes.append(node)

    def backward(self, output: "Tensor") -> None:
        """
        Accumulate d(output)/d(leaf) into ``grad`` of every trainable leaf.

        Gradients add onto whatever the leaves already hold; call
        ``zero_grad`` on the parameters between optimizer steps.

        Raises:
            UsageError: If nothing was recorded or ``output`` is not on this tape
            DimensionError: If ``output`` is not a scalar
        """
        if not self.nodes:
            raise UsageError("backward called before any forward operation was recorded")
        if output.size != 1:
            raise DimensionError(f"backward needs a scalar output, got shape {output.shape}")
        if output._node is None:
            raise UsageError("output was not produced by a recorded operation")

        grads = {id(output): np.ones_like(output.data)}
        for node in reversed(self.nodes):
            g = grads.pop(id(node.output), None)
            if g is None:
                continue
            input_grads = node.backward_fn(g)
            for tensor, tensor_grad in zip(node.inputs, input_grads):
                if tensor_grad is None or not tensor.requires_grad:
                    continue
                if tensor._node is None:
                    tensor._accumulate(tensor_grad)
                else:
                    key = id(tensor)
                    grads[key] = grads[key] + tensor_grad if key in grads else tensor_grad


class Tensor:
    """
    Dense row-major float64 array with gradient bookkeeping.

    Args:
        data: Array-like values; copied and converted to float64
        requires_grad: Mark as a trainable leaf
        name: Optional label used in error messages
    """

    __slots__ = ("data", "requires_grad", "grad", "name", "_node")

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        if isinstance(data, Tensor):
            data = data.data
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self._node: Optional[TapeNode] = None

    @classmethod
    def _from_op(cls, data: np.ndarray) -> "Tensor":
        tensor = cls.__new__(cls)
        tensor.data = data
        tensor.requires_grad = False
        tensor.grad = None
        tensor.name = None
        tensor._node = None
        return tensor

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def T(self) -> "Tensor":
        return ops.swap_last(self)

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.size == 1 else float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def assign(self, data: np.ndarray) -> None:
        """Replace the values of a leaf (optimizer updates, checkpoint loads)."""
        if self._node is not None:
            raise UsageError("only leaf tensors can be assigned")
        data = np.asarray(data, dtype=np.float64)
        if data.shape != self.data.shape:
            raise DimensionError(
                f"cannot assign shape {data.shape} to tensor of shape {self.data.shape}"
            )
        self.data = data.copy()

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, grad: np.ndarray) -> None:
        grad = ops.unbroadcast(grad, self.shape)
        self.grad = grad.copy() if self.grad is None else self.grad + grad

    # arithmetic
    def __add__(self, other):
        return ops.add(self, other)

    def __radd__(self, other):
        return ops.add(other, self)

    def __sub__(self, other):
        return ops.sub(self, other)

    def __rsub__(self, other):
        return ops.sub(other, self)

    def __mul__(self, other):
        return ops.mul(self, other)

    def __rmul__(self, other):
        return ops.mul(other, self)

    def __truediv__(self, other):
        return ops.div(self, other)

    def __rtruediv__(self, other):
        return ops.div(other, self)

    def __neg__(self):
        return ops.neg(self)

    def __matmul__(self, other):
        return ops.matmul(self, other)

    def __getitem__(self, index):
        return ops.getitem(self, index)

    # methods
    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        return ops.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        return ops.mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)

    def transpose(self, *axes) -> "Tensor":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return ops.transpose(self, axes or None)

    def exp(self) -> "Tensor":
        return ops.exp(self)

    def log(self) -> "Tensor":
        return ops.log(self)

    def tanh(self) -> "Tensor":
        return ops.tanh(self)

    def sigmoid(self) -> "Tensor":
        return ops.sigmoid(self)

    def relu(self) -> "Tensor":
        return ops.relu(self)

    def square(self) -> "Tensor":
        return ops.square(self)

    def softmax(self) -> "Tensor":
        return ops.softmax(self)

    def clip(self, low: float, high: float) -> "Tensor":
        return ops.clip(self, low, high)

    def __repr__(self) -> str:
        label = f", name={self.name}" if self.name else ""
        grad = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{grad}{label})"


TensorLike = Union[Tensor, np.ndarray, float, int, Sequence]


def as_tensor(value: TensorLike) -> Tensor:
    """Wrap a constant; tensors pass through unchanged."""
    if isinstance(value, Tensor):
        return value
    return Tensor._from_op(np.asarray(value, dtype=np.float64))


def make_result(op: str, data: np.ndarray, inputs: Tuple[Tensor, ...], backward_fn: BackwardFn) -> Tensor:
    """
    Wrap an op's output, checking finiteness and recording it on the tape.

    Raises:
        NumericError: If ``data`` contains NaN or Inf
    """
    data = np.asarray(data, dtype=np.float64)
    if not np.isfinite(data).all():
        raise NumericError(f"non-finite output in op '{op}'")
    out = Tensor._from_op(data)
    tape = active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        node = TapeNode(op, inputs, out, backward_fn)
        out._node = node
        tape.record(node)
    return out


from entityflow.diffcore import ops  # noqa: E402
