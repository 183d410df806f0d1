"""Finite-difference checks for analytic gradients."""

from typing import Callable, Dict, List, Sequence

import numpy as np

from entityflow.diffcore.tensor import Tape, Tensor


def analytic_gradients(fn: Callable[..., Tensor], arrays: Sequence[np.ndarray]) -> List[np.ndarray]:
    """Gradients of the scalar ``fn(*tensors)`` obtained from the tape."""
    leaves = [Tensor(a, requires_grad=True) for a in arrays]
    with Tape() as tape:
        out = fn(*leaves)
    tape.backward(out)
    return [leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data) for leaf in leaves]


def numeric_gradients(
    fn: Callable[..., Tensor], arrays: Sequence[np.ndarray], eps: float = 1e-5
) -> List[np.ndarray]:
    """Central differences of ``fn`` with respect to every input element."""
    arrays = [np.array(a, dtype=np.float64) for a in arrays]
    grads = []
    for i, array in enumerate(arrays):
        grad = np.zeros_like(array)
        flat = grad.reshape(-1)
        for j in range(array.size):
            shifted = [a.copy() for a in arrays]
            shifted[i].reshape(-1)[j] += eps
            upper = fn(*[Tensor(a) for a in shifted]).item()
            shifted[i].reshape(-1)[j] -= 2 * eps
            lower = fn(*[Tensor(a) for a in shifted]).item()
            flat[j] = (upper - lower) / (2 * eps)
        grads.append(grad)
    return grads


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """``|a - n| / max(|a|, |n|)`` over the whole array, 0 when both vanish."""
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric))
    if scale < 1e-12:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / scale)


def check_gradients(
    fn: Callable[..., Tensor], arrays: Sequence[np.ndarray], eps: float = 1e-5
) -> List[float]:
    """
    Compare tape gradients against central finite differences.

    Args:
        fn: Function of tensors returning a scalar tensor
        arrays: Input values, one per argument of ``fn``
        eps: Finite-difference step

    Returns:
        Relative error per input
    """
    analytic = analytic_gradients(fn, arrays)
    numeric = numeric_gradients(fn, arrays, eps)
    return [relative_error(a, n) for a, n in zip(analytic, numeric)]


def check_parameter_gradients(
    params: Dict[str, Tensor], loss_fn: Callable[[], Tensor], eps: float = 1e-5
) -> Dict[str, float]:
    """
    Compare tape gradients of named parameters against central differences.

    ``loss_fn`` must read the parameters through the given tensors; their
    values are perturbed in place and restored afterwards.

    Returns:
        Relative error per parameter name
    """
    for tensor in params.values():
        tensor.zero_grad()
    with Tape() as tape:
        loss = loss_fn()
    tape.backward(loss)

    errors = {}
    for name, tensor in params.items():
        analytic = tensor.grad if tensor.grad is not None else np.zeros_like(tensor.data)
        numeric = np.zeros_like(tensor.data)
        flat = tensor.data.reshape(-1)
        for j in range(flat.size):
            original = flat[j]
            flat[j] = original + eps
            upper = loss_fn().item()
            flat[j] = original - eps
            lower = loss_fn().item()
            flat[j] = original
            numeric.reshape(-1)[j] = (upper - lower) / (2 * eps)
        errors[name] = relative_error(analytic, numeric)
        tensor.zero_grad()
    return errors
