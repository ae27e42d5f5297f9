"""Adam with bias-corrected moment estimates."""
from dataclasses import dataclass, field
from typing import Dict, Mapping

import numpy as np

from src.errors import ContractError
from src.recommender.parameters import ParameterSet
from src.training.config import TrainConfig


@dataclass
class OptimizerState:
    """First/second moment buffers per parameter name and the step counter."""
    first_moments: Dict[str, np.ndarray] = field(default_factory=dict)
    second_moments: Dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0


def adam_step(params: ParameterSet, grads: Mapping[str, np.ndarray], state: OptimizerState,
              config: TrainConfig) -> OptimizerState:
    """
    Apply one Adam update in place.

    m ← β₁m + (1−β₁)g, v ← β₂v + (1−β₂)g², θ ← θ − lr·m̂/(√v̂ + ε) with
    m̂ = m/(1−β₁ᵗ) and v̂ = v/(1−β₂ᵗ).

    Args:
        params: Parameters to update
        grads: Gradient per parameter name
        state: Moment buffers, updated and returned
        config: Learning rate, betas and epsilon

    Returns:
        The updated state
    """
    beta1, beta2 = config.adam_beta1, config.adam_beta2
    state.step += 1
    correction1 = 1.0 - beta1 ** state.step
    correction2 = 1.0 - beta2 ** state.step

    for name, tensor in params.items():
        grad = grads[name]
        if grad is None:
            continue
        if grad.shape != tensor.shape:
            raise ContractError(f"gradient shape {grad.shape} does not match parameter {name} {tensor.shape}")

        if name not in state.first_moments:
            state.first_moments[name] = np.zeros_like(tensor.values)
            state.second_moments[name] = np.zeros_like(tensor.values)
        m, v = state.first_moments[name], state.second_moments[name]

        m *= beta1
        m += (1.0 - beta1) * grad
        v *= beta2
        v += (1.0 - beta2) * (grad * grad)

        denominator = np.sqrt(v / correction2) + config.adam_epsilon
        tensor.values -= config.learning_rate * (m / correction1) / denominator

    return state


class Adam:
    """Adam bound to a parameter set; reads gradients from the tensors."""

    def __init__(self, params: ParameterSet, config: TrainConfig):
        """
        Initialize optimizer.

        Args:
            params: Parameters to optimize
            config: Optimizer settings
        """
        self.params = params
        self.config = config
        self.state = OptimizerState()

    def step(self):
        adam_step(self.params, self.params.gradients(), self.state, self.config)

    def zero_grad(self):
        self.params.zero_grad()
