"""Minimal dense-tensor engine with reverse-mode differentiation."""
from src.autograd.tensor import (
    ComputationTape,
    Tensor,
    backward,
    current_tape,
    is_grad_enabled,
    no_grad,
)
from src.autograd.gradcheck import finite_difference_check, gradient_check

__all__ = [
    'ComputationTape',
    'Tensor',
    'backward',
    'current_tape',
    'finite_difference_check',
    'gradient_check',
    'is_grad_enabled',
    'no_grad',
]
