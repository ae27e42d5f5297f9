"""Named learnable tensors of a TLSRec model."""
import math
from collections import OrderedDict
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from src.autograd import Tensor
from src.errors import ContractError
from src.recommender.config import ModelConfig, Variant


Shape = Tuple[int, ...]


def block_prefix(block: int) -> str:
    return f"block{block}"


def parameter_shapes(config: ModelConfig, user_count: int, item_count: int) -> 'OrderedDict[str, Shape]':
    """
    Every learnable tensor of ``config`` with its shape, in checkpoint order.

    Matrices keep the column-vector orientation: embedding tables are d×count
    and projections map d-vectors on the right.

    Args:
        config: Model configuration
        user_count: N
        item_count: M

    Returns:
        Ordered mapping from parameter name to shape
    """
    d, T, C = config.d, config.T, config.C
    heads, head_dim = config.effective_heads, config.head_dim
    variant = config.variant
    shapes: 'OrderedDict[str, Shape]' = OrderedDict()

    shapes['item_embeddings'] = (d, item_count)
    shapes['user_embeddings'] = (d, user_count)

    if variant.uses_short_attention:
        for role in ('query', 'key', 'value'):
            shapes[f'short.{role}'] = (d, d)

    if variant.uses_blocks:
        shapes['position_embeddings'] = (d, T)
        for b in range(config.block_count):
            prefix = block_prefix(b)
            for j in range(heads):
                for role in ('query', 'key', 'value'):
                    shapes[f'{prefix}.head{j}.{role}'] = (head_dim, d)
            shapes[f'{prefix}.output'] = (d, d)
            shapes[f'{prefix}.norm_scale'] = (d,)
            shapes[f'{prefix}.norm_shift'] = (d,)
            shapes[f'{prefix}.ffn_in_weight'] = (4 * d, d)
            shapes[f'{prefix}.ffn_in_bias'] = (4 * d,)
            shapes[f'{prefix}.ffn_out_weight'] = (d, 4 * d)
            shapes[f'{prefix}.ffn_out_bias'] = (d,)

    shapes['long.weight'] = (d, d)
    shapes['long.bias'] = (d,)

    if variant.uses_gate:
        shapes['lag_embeddings'] = (d, C)
        shapes['gate.long'] = (d, d)
        shapes['gate.short'] = (d, d)
        shapes['gate.lag'] = (d, d)
        shapes['gate.bias'] = (d,)
    elif variant is Variant.GATE_SELF_ATTENTION:
        for role in ('query', 'key', 'value'):
            shapes[f'fusion.{role}'] = (d, d)
    elif variant is Variant.GATE_MULTIHEAD:
        fusion_dim = d // config.h
        for j in range(config.h):
            for role in ('query', 'key', 'value'):
                shapes[f'fusion.head{j}.{role}'] = (fusion_dim, d)
        shapes['fusion.output'] = (d, d)

    return shapes


def parameter_count(config: ModelConfig, user_count: int, item_count: int) -> int:
    """Total number of learnable scalars."""
    return sum(math.prod(shape) for shape in parameter_shapes(config, user_count, item_count).values())


def _initial_values(name: str, shape: Shape, bound: float, rng: np.random.Generator) -> np.ndarray:
    if name.endswith('norm_scale'):
        return np.ones(shape)
    if name.endswith(('norm_shift', 'bias')):
        return np.zeros(shape)
    return rng.uniform(-bound, bound, size=shape)


class ParameterSet:
    """
    Ordered collection of named parameter tensors.

    Iteration order is the checkpoint order from ``parameter_shapes``.
    """

    def __init__(self, tensors: 'OrderedDict[str, Tensor]'):
        """
        Initialize parameter set.

        Args:
            tensors: Parameter tensors keyed by name, in checkpoint order
        """
        self._tensors = OrderedDict(tensors)
        for name, tensor in self._tensors.items():
            tensor.name = name

    @classmethod
    def initialize(cls, config: ModelConfig, user_count: int, item_count: int, seed: int = 0) -> 'ParameterSet':
        """
        Draw fresh parameters.

        Matrices are uniform in [-1/sqrt(d), 1/sqrt(d)], biases and norm shifts
        are zero and norm scales are one. Draws happen in checkpoint order from
        one generator, so equal shapes and seeds give equal values.
        """
        if user_count < 1 or item_count < 1:
            raise ContractError(f"need at least one user and one item, got N={user_count}, M={item_count}")
        rng = np.random.default_rng(seed)
        bound = 1.0 / math.sqrt(config.d)
        tensors = OrderedDict(
            (name, Tensor(_initial_values(name, shape, bound, rng), requires_grad=True))
            for name, shape in parameter_shapes(config, user_count, item_count).items()
        )
        return cls(tensors)

    @classmethod
    def from_arrays(cls, arrays: 'OrderedDict[str, np.ndarray]') -> 'ParameterSet':
        return cls(OrderedDict((name, Tensor(values, requires_grad=True)) for name, values in arrays.items()))

    def __getitem__(self, name: str) -> Tensor:
        try:
            return self._tensors[name]
        except KeyError:
            raise ContractError(f"model has no parameter {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def get(self, name: str) -> Optional[Tensor]:
        return self._tensors.get(name)

    def names(self) -> List[str]:
        return list(self._tensors)

    def tensors(self) -> List[Tensor]:
        return list(self._tensors.values())

    def items(self):
        return self._tensors.items()

    def shapes(self) -> Dict[str, Shape]:
        return {name: t.shape for name, t in self._tensors.items()}

    def count(self) -> int:
        """Number of learnable scalars."""
        return sum(t.size for t in self._tensors.values())

    def zero_grad(self):
        for tensor in self._tensors.values():
            tensor.zero_grad()

    def gradients(self) -> 'OrderedDict[str, np.ndarray]':
        return OrderedDict((name, t.grad) for name, t in self._tensors.items())

    def squared_norm(self) -> float:
        return float(sum(np.sum(t.values * t.values) for t in self._tensors.values()))

    def norms(self) -> Dict[str, float]:
        """L2 norm per parameter, for divergence diagnostics."""
        return {name: float(np.linalg.norm(t.values)) for name, t in self._tensors.items()}

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(t.values)) for t in self._tensors.values())

    def state(self) -> 'OrderedDict[str, np.ndarray]':
        """Copies of all values."""
        return OrderedDict((name, t.values.copy()) for name, t in self._tensors.items())

    def load_state(self, state: Dict[str, np.ndarray]):
        """Overwrite values in place from ``state`` (same names and shapes)."""
        if set(state) != set(self._tensors):
            raise ContractError("parameter names do not match the stored state")
        for name, tensor in self._tensors.items():
            values = np.asarray(state[name], dtype=np.float64)
            if values.shape != tensor.shape:
                raise ContractError(f"shape mismatch for {name}: {values.shape} vs {tensor.shape}")
            tensor.values[...] = values

    def copy(self) -> 'ParameterSet':
        return ParameterSet.from_arrays(self.state())
