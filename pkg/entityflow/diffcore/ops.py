"""Differentiable primitives.

Each primitive computes its value with numpy and registers a backward rule
that maps the output gradient to one gradient per input.
"""

from typing import Optional, Sequence, Tuple

import numpy as np

from entityflow.core.exceptions import DimensionError
from entityflow.diffcore.tensor import Tensor, TensorLike, as_tensor, make_result


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(op: str, a: Tensor, b: Tensor) -> Tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast")


def add(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("add", a, b)

    def backward(g):
        return unbroadcast(g, a.shape), unbroadcast(g, b.shape)

    return make_result("add", a.data + b.data, (a, b), backward)


def sub(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("sub", a, b)

    def backward(g):
        return unbroadcast(g, a.shape), unbroadcast(-g, b.shape)

    return make_result("sub", a.data - b.data, (a, b), backward)


def mul(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("mul", a, b)

    def backward(g):
        return unbroadcast(g * b.data, a.shape), unbroadcast(g * a.data, b.shape)

    return make_result("mul", a.data * b.data, (a, b), backward)


def div(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("div", a, b)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = a.data / b.data

    def backward(g):
        return (
            unbroadcast(g / b.data, a.shape),
            unbroadcast(-g * a.data / (b.data * b.data), b.shape),
        )

    return make_result("div", out, (a, b), backward)


def neg(a: TensorLike) -> Tensor:
    a = as_tensor(a)
    return make_result("neg", -a.data, (a,), lambda g: (-g,))


def square(a: TensorLike) -> Tensor:
    a = as_tensor(a)
    return make_result("square", a.data * a.data, (a,), lambda g: (2.0 * a.data * g,))


def exp(a: TensorLike) -> Tensor:
    a = as_tensor(a)
    with np.errstate(over="ignore"):
        out = np.exp(a.data)
    return make_result("exp", out, (a,), lambda g: (g * out,))


def log(a: TensorLike) -> Tensor:
    a = as_tensor(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(a.data)
    return make_result("log", out, (a,), lambda g: (g / a.data,))


def tanh(a: TensorLike) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return make_result("tanh", out, (a,), lambda g: (g * (1.0 - out * out),))


def sigmoid(a: TensorLike) -> Tensor:
    a = as_tensor(a)
    # split by sign so large |x| never overflows exp
    positive = a.data >= 0
    z = np.exp(-np.abs(a.data))
    out = np.where(positive, 1.0 / (1.0 + z), z / (1.0 + z))
    return make_result("sigmoid", out, (a,), lambda g: (g * out * (1.0 - out),))


def relu(a: TensorLike) -> Tensor:
    a = as_tensor(a)
    active = a.data > 0
    return make_result("relu", np.where(active, a.data, 0.0), (a,), lambda g: (g * active,))


def clip(a: TensorLike, low: float, high: float) -> Tensor:
    a = as_tensor(a)
    inside = (a.data >= low) & (a.data <= high)
    return make_result("clip", np.clip(a.data, low, high), (a,), lambda g: (g * inside,))


def softmax(a: TensorLike) -> Tensor:
    """Softmax over the last axis, computed with max-subtraction."""
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=-1, keepdims=True)),)

    return make_result("softmax", out, (a,), backward)


def matmul(a: TensorLike, b: TensorLike) -> Tensor:
    """Batched matrix product over the last two axes with broadcast batch axes."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionError(f"matmul needs 2-D or higher operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul: inner dimensions differ, {a.shape} @ {b.shape}")
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError:
        raise DimensionError(f"matmul: batch shapes {a.shape[:-2]} and {b.shape[:-2]} do not broadcast")

    def backward(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return unbroadcast(ga, a.shape), unbroadcast(gb, b.shape)

    return make_result("matmul", a.data @ b.data, (a, b), backward)


def masked_linear(
    x: TensorLike, weight: TensorLike, mask: np.ndarray, bias: Optional[TensorLike] = None
) -> Tensor:
    """
    ``x @ (weight * mask) + bias`` with a constant binary mask.

    The mask is applied to the weight before the product, so masked entries
    receive zero gradient.
    """
    x, weight = as_tensor(x), as_tensor(weight)
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != weight.shape:
        raise DimensionError(f"masked_linear: mask {mask.shape} does not match weight {weight.shape}")
    if x.shape[-1] != weight.shape[0]:
        raise DimensionError(f"masked_linear: input {x.shape} does not fit weight {weight.shape}")
    effective = weight.data * mask
    out = x.data @ effective
    inputs: Tuple[Tensor, ...] = (x, weight)
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (weight.shape[1],):
            raise DimensionError(f"masked_linear: bias {bias.shape} does not match {weight.shape[1]} outputs")
        out = out + bias.data
        inputs = inputs + (bias,)

    def backward(g):
        flat_x = x.data.reshape(-1, x.shape[-1])
        flat_g = g.reshape(-1, g.shape[-1])
        grads = [g @ effective.T, (flat_x.T @ flat_g) * mask]
        if bias is not None:
            grads.append(flat_g.sum(axis=0))
        return grads

    return make_result("masked_linear", out, inputs, backward)


def sum(a: TensorLike, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    a = as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return make_result("sum", out, (a,), backward)


def mean(a: TensorLike, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    count = a.size if axis is None else int(np.prod([a.shape[i] for i in np.atleast_1d(axis)]))
    out = a.data.mean(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / count, a.shape).copy(),)

    return make_result("mean", out, (a,), backward)


def reshape(a: TensorLike, shape: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise DimensionError(f"cannot reshape {a.shape} to {tuple(shape)}")
    return make_result("reshape", out, (a,), lambda g: (g.reshape(a.shape),))


def transpose(a: TensorLike, axes: Optional[Sequence[int]] = None) -> Tensor:
    a = as_tensor(a)
    inverse = None if axes is None else np.argsort(axes)
    return make_result(
        "transpose", np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inverse),)
    )


def swap_last(a: TensorLike) -> Tensor:
    """Swap the last two axes."""
    a = as_tensor(a)
    axes = list(range(a.ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return transpose(a, axes)


def getitem(a: TensorLike, index) -> Tensor:
    """Basic and advanced indexing; repeated indices accumulate gradient."""
    a = as_tensor(a)
    parts = index if isinstance(index, tuple) else (index,)
    basic = all(isinstance(p, (int, np.integer, slice)) or p is Ellipsis or p is None for p in parts)

    def backward(g):
        grad = np.zeros_like(a.data)
        if basic:
            grad[index] = g
        else:
            np.add.at(grad, index, g)
        return (grad,)

    return make_result("getitem", a.data[index], (a,), backward)


def concat(tensors: Sequence[TensorLike], axis: int = 0) -> Tensor:
    tensors = tuple(as_tensor(t) for t in tensors)
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as e:
        raise DimensionError(f"concat: {e}")
    splits = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return np.split(g, splits, axis=axis)

    return make_result("concat", out, tensors, backward)


def stack(tensors: Sequence[TensorLike], axis: int = 0) -> Tensor:
    tensors = tuple(as_tensor(t) for t in tensors)
    try:
        out = np.stack([t.data for t in tensors], axis=axis)
    except ValueError as e:
        raise DimensionError(f"stack: {e}")

    def backward(g):
        return [np.take(g, i, axis=axis) for i in range(len(tensors))]

    return make_result("stack", out, tensors, backward)
