"""Finite-difference verification of reverse-mode gradients."""
from typing import Callable, Dict, Sequence

import numpy as np

from src.autograd.tensor import Tensor, backward, current_tape, no_grad


def analytic_gradients(loss_fn: Callable[[], Tensor], tensors: Sequence[Tensor]) -> Dict[int, np.ndarray]:
    """
    Evaluate ``loss_fn`` on a fresh tape and return d(loss)/d(tensor) per tensor.

    Existing gradient buffers are restored afterwards.
    """
    saved = [t.grad for t in tensors]
    current_tape().clear()
    try:
        for t in tensors:
            t.grad = np.zeros_like(t.values)
        backward(loss_fn())
        return {id(t): t.grad.copy() for t in tensors}
    finally:
        for t, grad in zip(tensors, saved):
            t.grad = grad


def numeric_gradient(loss_fn: Callable[[], Tensor], tensor: Tensor, step: float) -> np.ndarray:
    """Central finite differences of ``loss_fn`` with respect to every entry of ``tensor``."""
    grad = np.zeros_like(tensor.values)
    flat_values = tensor.values.reshape(-1)
    flat_grad = grad.reshape(-1)

    with no_grad():
        for i in range(flat_values.size):
            original = flat_values[i]
            flat_values[i] = original + step
            upper = loss_fn().item()
            flat_values[i] = original - step
            lower = loss_fn().item()
            flat_values[i] = original
            flat_grad[i] = (upper - lower) / (2.0 * step)

    return grad


def gradient_check(loss_fn: Callable[[], Tensor], tensors: Sequence[Tensor], step: float = 1e-4) -> float:
    """
    Compare tape gradients with central finite differences.

    Args:
        loss_fn: Zero-argument function recomputing the scalar loss from ``tensors``
        tensors: Leaves (requires_grad=True) to check
        step: Finite-difference step

    Returns:
        max over all coordinates of |analytic − numeric| / max(1, |numeric|)
    """
    analytic = analytic_gradients(loss_fn, tensors)
    worst = 0.0
    for tensor in tensors:
        numeric = numeric_gradient(loss_fn, tensor, step)
        error = np.abs(analytic[id(tensor)] - numeric) / np.maximum(1.0, np.abs(numeric))
        if error.size:
            worst = max(worst, float(error.max()))
    return worst


def finite_difference_check(f: Callable[[Tensor], Tensor], x: Tensor, step: float = 1e-4) -> float:
    """
    Maximum relative gradient error of the scalar function ``f`` at ``x``.

    Example:
        x = Tensor(np.random.randn(4), requires_grad=True)
        finite_difference_check(lambda t: ops.sum(ops.sigmoid(t)), x)  # ~1e-10
    """
    return gradient_check(lambda: f(x), [x], step)
