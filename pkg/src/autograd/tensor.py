"""Dense float64 tensors with tape-based reverse-mode differentiation."""
import threading
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from src.errors import ContractError, DimensionError


MAX_AXES = 3

# Maps the output adjoint to one adjoint per input (None where no gradient flows)
LocalGradient = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Tensor:
    """
    Dense real-valued array with optional gradient buffer.

    Leaves are created by callers (parameters, inputs); non-leaves are created
    by the primitives in ``src.autograd.ops`` and are recorded on the current
    thread's tape whenever one of their inputs requires a gradient.

    Example:
        x = Tensor([1.0, 2.0], requires_grad=True)
        loss = ops.sum(ops.mul(x, x))
        backward(loss)
        x.grad  # array([2., 4.])
    """

    __slots__ = ('values', 'requires_grad', 'grad', 'name', '_is_leaf')

    def __init__(self, values, requires_grad: bool = False, name: Optional[str] = None):
        """
        Initialize tensor.

        Args:
            values: Array-like data, copied into a float64 array
            requires_grad: Whether gradients should be accumulated for this tensor
            name: Optional label used in error messages and checkpoints
        """
        array = np.array(values, dtype=np.float64)
        if array.ndim > MAX_AXES:
            raise DimensionError(f"tensors support at most {MAX_AXES} axes, got shape {array.shape}")

        self.values = array
        self.requires_grad = bool(requires_grad)
        self.grad = np.zeros_like(array) if self.requires_grad else None
        self.name = name
        self._is_leaf = True

    @classmethod
    def _from_op(cls, values: np.ndarray, requires_grad: bool) -> 'Tensor':
        """Wrap a primitive's result without copying."""
        tensor = cls.__new__(cls)
        tensor.values = values
        tensor.requires_grad = requires_grad
        tensor.grad = None
        tensor.name = None
        tensor._is_leaf = False
        return tensor

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.values.shape

    @property
    def ndim(self) -> int:
        return self.values.ndim

    @property
    def size(self) -> int:
        return int(self.values.size)

    @property
    def is_leaf(self) -> bool:
        return self._is_leaf

    def item(self) -> float:
        """Return the single value of a one-element tensor."""
        if self.values.size != 1:
            raise ContractError(f"item() needs a one-element tensor, got shape {self.shape}")
        return float(self.values.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        """Return a copy of the values."""
        return self.values.copy()

    def zero_grad(self):
        """Reset the gradient buffer of a leaf."""
        if self.requires_grad:
            self.grad = np.zeros_like(self.values)

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{label})"

    # Operator sugar over the primitives in ops
    def __add__(self, other: 'Tensor') -> 'Tensor':
        from src.autograd import ops
        return ops.add(self, other)

    def __sub__(self, other: 'Tensor') -> 'Tensor':
        from src.autograd import ops
        return ops.sub(self, other)

    def __mul__(self, other: 'Tensor') -> 'Tensor':
        from src.autograd import ops
        return ops.mul(self, other)


@dataclass
class TapeNode:
    """One recorded primitive application."""
    op_name: str
    output: Tensor
    inputs: Tuple[Tensor, ...]
    local_gradient: LocalGradient


class ComputationTape:
    """
    Ordered record of primitive applications for reverse-mode differentiation.

    A tape belongs to one thread; ``current_tape()`` hands each thread its own.
    """

    def __init__(self):
        """Initialize an empty tape."""
        self.nodes: List[TapeNode] = []

    def __len__(self) -> int:
        return len(self.nodes)

    def record(self, op_name: str, output: Tensor, inputs: Sequence[Tensor],
               local_gradient: LocalGradient):
        """
        Append a primitive application.

        Args:
            op_name: Primitive name (for diagnostics)
            output: Tensor produced by the primitive
            inputs: Input tensors in the order the local gradient returns them
            local_gradient: Adjoint rule of the primitive
        """
        self.nodes.append(TapeNode(op_name, output, tuple(inputs), local_gradient))

    def clear(self):
        """Drop every recorded node."""
        self.nodes = []

    def backward(self, loss: Tensor):
        """
        Propagate d(loss)/d(leaf) into every reachable requires_grad leaf.

        Nodes are visited once each in reverse record order; the tape is cleared
        afterwards.

        Args:
            loss: Scalar tensor produced through recorded primitives

        Raises:
            ContractError: If the loss is not a scalar
        """
        if loss.size != 1:
            raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")

        if loss.is_leaf:
            if loss.requires_grad:
                loss.grad = loss.grad + np.ones_like(loss.values)
            self.clear()
            return

        adjoints = {id(loss): np.ones_like(loss.values)}
        try:
            for node in reversed(self.nodes):
                adjoint = adjoints.pop(id(node.output), None)
                if adjoint is None:
                    continue

                input_adjoints = node.local_gradient(adjoint)
                for tensor, input_adjoint in zip(node.inputs, input_adjoints):
                    if input_adjoint is None or not tensor.requires_grad:
                        continue
                    if tensor.is_leaf:
                        tensor.grad = tensor.grad + input_adjoint
                    else:
                        key = id(tensor)
                        if key in adjoints:
                            adjoints[key] = adjoints[key] + input_adjoint
                        else:
                            adjoints[key] = input_adjoint
        finally:
            self.clear()


_thread_state = threading.local()


def current_tape() -> ComputationTape:
    """Return the calling thread's tape, creating it on first use."""
    tape = getattr(_thread_state, 'tape', None)
    if tape is None:
        tape = ComputationTape()
        _thread_state.tape = tape
    return tape


def is_grad_enabled() -> bool:
    """Whether primitives are currently recorded on this thread."""
    return getattr(_thread_state, 'grad_enabled', True)


@contextmanager
def no_grad() -> Iterator[None]:
    """
    Disable recording for the calling thread.

    Example:
        with no_grad():
            scores = model.score_all_items(trace)
    """
    previous = is_grad_enabled()
    _thread_state.grad_enabled = False
    try:
        yield
    finally:
        _thread_state.grad_enabled = previous


def backward(loss: Tensor):
    """Run reverse-mode differentiation of ``loss`` on the current tape."""
    current_tape().backward(loss)
