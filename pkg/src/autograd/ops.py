"""Forward primitives with their local gradient rules."""
import builtins
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from src.autograd.tensor import Tensor, current_tape, is_grad_enabled
from src.errors import DimensionError, EmbeddingIndexError, InvalidMaskError


ArrayLike = Union[Tensor, np.ndarray, float, int, Sequence[float]]


def as_tensor(value: ArrayLike) -> Tensor:
    """Wrap constants as non-differentiable tensors; pass tensors through."""
    if isinstance(value, Tensor):
        return value
    return Tensor(value, requires_grad=False)


def _result(op_name: str, values: np.ndarray, inputs: Sequence[Tensor], local_gradient) -> Tensor:
    """Build a primitive's output and record it when a gradient can flow."""
    track = is_grad_enabled() and builtins.any(t.requires_grad for t in inputs)
    output = Tensor._from_op(values, track)
    if track:
        current_tape().record(op_name, output, inputs, local_gradient)
    return output


def _reduce_to_shape(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast adjoint back to the operand's shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _require_same_shape(op_name: str, a: Tensor, b: Tensor):
    if a.shape != b.shape:
        raise DimensionError(f"{op_name}: shape mismatch {a.shape} vs {b.shape}")


# ---------------------------------------------------------------------------
# Linear algebra
# ---------------------------------------------------------------------------

def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    """
    Matrix product with leading-axis broadcasting.

    Supports 2-D @ 2-D, matrix @ vector, 2-D @ 3-D (shared left factor) and
    batched 3-D @ 3-D.

    Raises:
        DimensionError: If the inner dimensions disagree
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 1:
        raise DimensionError(f"matmul: unsupported operand shapes {a.shape} and {b.shape}")

    b_is_vector = b.ndim == 1
    b_values = b.values[:, None] if b_is_vector else b.values
    if a.shape[-1] != b_values.shape[-2]:
        raise DimensionError(f"matmul: inner dimensions disagree for shapes {a.shape} and {b.shape}")

    try:
        out = np.matmul(a.values, b_values)
    except ValueError as e:
        raise DimensionError(f"matmul: cannot multiply shapes {a.shape} and {b.shape}") from e
    if b_is_vector:
        out = out[..., 0]

    def local_gradient(g):
        g2 = g[..., None] if b_is_vector else g
        grad_a = _reduce_to_shape(np.matmul(g2, np.swapaxes(b_values, -1, -2)), a.shape)
        grad_b = np.matmul(np.swapaxes(a.values, -1, -2), g2)
        if b_is_vector:
            grad_b = _reduce_to_shape(grad_b, b_values.shape)[..., 0]
        else:
            grad_b = _reduce_to_shape(grad_b, b.shape)
        return grad_a, grad_b

    return _result('matmul', out, (a, b), local_gradient)


def transpose(x: Tensor) -> Tensor:
    """Swap the last two axes."""
    if x.ndim < 2:
        raise DimensionError(f"transpose: need at least 2 axes, got shape {x.shape}")
    out = np.swapaxes(x.values, -1, -2)
    return _result('transpose', out, (x,), lambda g: (np.swapaxes(g, -1, -2),))


def reshape(x: Tensor, shape: Tuple[int, ...]) -> Tensor:
    """Reinterpret the values with a new shape of the same size."""
    shape = tuple(shape)
    if int(np.prod(shape)) != x.size:
        raise DimensionError(f"reshape: cannot view shape {x.shape} as {shape}")
    original = x.shape
    out = x.values.reshape(shape)
    return _result('reshape', out, (x,), lambda g: (g.reshape(original),))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    """Concatenate tensors along an existing axis (vertical stacking for axis 0)."""
    if not tensors:
        raise DimensionError("concat: need at least one tensor")
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.values for t in tensors], axis=axis)
    except ValueError as e:
        shapes = ", ".join(str(t.shape) for t in tensors)
        raise DimensionError(f"concat: incompatible shapes {shapes} along axis {axis}") from e

    boundaries = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def local_gradient(g):
        return tuple(np.split(g, boundaries, axis=axis))

    return _result('concat', out, tensors, local_gradient)


def stack_columns(vectors: Sequence[Tensor]) -> Tensor:
    """Place d-vectors side by side as the columns of a d×n matrix."""
    columns = [reshape(v, (v.shape[0], 1)) for v in vectors]
    return concat(columns, axis=1)


def select_column(x: Tensor, index: int) -> Tensor:
    """
    Return column ``index`` of a 2-D tensor.

    Raises:
        EmbeddingIndexError: If the index is out of range
    """
    if x.ndim != 2:
        raise DimensionError(f"select_column: need a 2-D tensor, got shape {x.shape}")
    index = int(index)
    if not 0 <= index < x.shape[1]:
        label = x.name or 'tensor'
        raise EmbeddingIndexError(f"column {index} out of range for {label} with {x.shape[1]} columns")

    out = x.values[:, index].copy()
    shape = x.shape

    def local_gradient(g):
        grad = np.zeros(shape)
        grad[:, index] = g
        return (grad,)

    return _result('select_column', out, (x,), local_gradient)


def embedding_lookup(table: Tensor, ids) -> Tensor:
    """
    Gather columns of a d×n lookup table.

    Args:
        table: d×n embedding matrix (one column per entity)
        ids: Integer array of shape (k,) or (T, k)

    Returns:
        d×k tensor for 1-D ids, T×d×k tensor for 2-D ids

    Raises:
        EmbeddingIndexError: If any id is outside [0, n)
    """
    ids = np.asarray(ids, dtype=np.int64)
    if ids.ndim not in (1, 2):
        raise DimensionError(f"embedding_lookup: ids must have 1 or 2 axes, got shape {ids.shape}")
    count = table.shape[1]
    if ids.size and (ids.min() < 0 or ids.max() >= count):
        label = table.name or 'table'
        raise EmbeddingIndexError(f"id out of range [0, {count}) for {label}: {ids.min()}..{ids.max()}")

    out = np.swapaxes(table.values.T[ids], -1, -2)
    shape = table.shape

    def local_gradient(g):
        grad_t = np.zeros((shape[1], shape[0]))
        np.add.at(grad_t, ids, np.swapaxes(g, -1, -2))
        return (grad_t.T,)

    return _result('embedding_lookup', out, (table,), local_gradient)


# ---------------------------------------------------------------------------
# Elementwise
# ---------------------------------------------------------------------------

def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    """Elementwise sum of equal-shape tensors."""
    a, b = as_tensor(a), as_tensor(b)
    _require_same_shape('add', a, b)
    return _result('add', a.values + b.values, (a, b), lambda g: (g, g))


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    """Elementwise difference of equal-shape tensors."""
    a, b = as_tensor(a), as_tensor(b)
    _require_same_shape('sub', a, b)
    return _result('sub', a.values - b.values, (a, b), lambda g: (g, -g))


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    """Elementwise product of equal-shape tensors."""
    a, b = as_tensor(a), as_tensor(b)
    _require_same_shape('mul', a, b)
    a_values, b_values = a.values, b.values
    return _result('mul', a_values * b_values, (a, b), lambda g: (g * b_values, g * a_values))


def scale(x: Tensor, factor: float) -> Tensor:
    """Multiply by a constant scalar."""
    factor = float(factor)
    return _result('scale', x.values * factor, (x,), lambda g: (g * factor,))


def add_bias(x: Tensor, bias: Tensor) -> Tensor:
    """
    Add a d-vector to every column of a d×n (or T×d×n) tensor.

    A 1-D ``x`` takes a bias of its own shape.
    """
    if bias.ndim != 1:
        raise DimensionError(f"add_bias: bias must be 1-D, got shape {bias.shape}")
    if x.ndim == 1:
        return add(x, bias)
    if x.shape[-2] != bias.shape[0]:
        raise DimensionError(f"add_bias: bias shape {bias.shape} does not match rows of {x.shape}")

    out = x.values + bias.values[:, None]
    reduce_axes = tuple(i for i in range(x.ndim) if i != x.ndim - 2)
    return _result('add_bias', out, (x, bias), lambda g: (g, g.sum(axis=reduce_axes)))


def relu(x: Tensor) -> Tensor:
    """max(0, x) elementwise."""
    active = x.values > 0
    return _result('relu', np.where(active, x.values, 0.0), (x,), lambda g: (g * active,))


def _stable_sigmoid(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    flat = values.reshape(-1)
    out = np.empty_like(flat)
    positive = flat >= 0
    out[positive] = 1.0 / (1.0 + np.exp(-flat[positive]))
    exp_values = np.exp(flat[~positive])
    out[~positive] = exp_values / (1.0 + exp_values)
    return out.reshape(values.shape)


def sigmoid(x: Tensor) -> Tensor:
    """Logistic function elementwise."""
    out = _stable_sigmoid(x.values)
    return _result('sigmoid', out, (x,), lambda g: (g * out * (1.0 - out),))


def log_sigmoid(x: Tensor) -> Tensor:
    """log(sigmoid(x)) elementwise, without overflow for large |x|."""
    out = -np.logaddexp(0.0, -x.values)
    complement = _stable_sigmoid(-x.values)
    return _result('log_sigmoid', out, (x,), lambda g: (g * complement,))


def dropout(x: Tensor, rate: float, rng: Optional[np.random.Generator], training: bool) -> Tensor:
    """
    Inverted dropout: zero entries with probability ``rate`` and rescale the rest.

    Identity (and not recorded) outside training mode or when the rate is 0.
    """
    if not training or rate <= 0.0:
        return x
    if rng is None:
        raise ValueError("dropout in training mode needs a random generator")
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return _result('dropout', x.values * keep, (x,), lambda g: (g * keep,))


# ---------------------------------------------------------------------------
# Reductions and normalizations
# ---------------------------------------------------------------------------

def sum(x: Tensor, axis: Optional[int] = None) -> Tensor:
    """Sum over one axis, or over everything into a scalar."""
    shape = x.shape
    if axis is None:
        out = np.asarray(x.values.sum())

        def local_gradient(g):
            return (np.broadcast_to(g, shape).copy(),)
    else:
        out = x.values.sum(axis=axis)

        def local_gradient(g):
            return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

    return _result('sum', out, (x,), local_gradient)


def softmax_over_keys(scores: Tensor, mask: Optional[np.ndarray] = None) -> Tensor:
    """
    Row-wise softmax over the last axis.

    Masked keys are excluded from normalization and receive exactly 0 weight;
    rows are stabilized by subtracting their maximum over unmasked keys.

    Args:
        scores: Tensor whose last axis indexes keys
        mask: Optional boolean array, True marks an excluded key; broadcast
              against ``scores``

    Raises:
        InvalidMaskError: If some row has every key masked
    """
    values = scores.values
    if mask is not None:
        try:
            mask = np.broadcast_to(np.asarray(mask, dtype=bool), values.shape)
        except ValueError as e:
            raise DimensionError(f"softmax_over_keys: mask shape {np.shape(mask)} "
                                 f"does not match scores {values.shape}") from e
        if np.any(np.all(mask, axis=-1)):
            raise InvalidMaskError("softmax_over_keys: a row has every key masked")
        values = np.where(mask, -np.inf, values)

    row_max = np.max(values, axis=-1, keepdims=True)
    exp_values = np.exp(values - row_max)
    out = exp_values / exp_values.sum(axis=-1, keepdims=True)

    def local_gradient(g):
        return (out * (g - np.sum(g * out, axis=-1, keepdims=True)),)

    return _result('softmax_over_keys', out, (scores,), local_gradient)


def layer_norm(x: Tensor, alpha: Tensor, beta: Tensor, epsilon: float) -> Tensor:
    """
    alpha ⊗ (x − μ)/sqrt(σ² + ε) + beta, normalizing each column over axis 0.

    ``x`` is a d-vector or a d×T matrix of column vectors; alpha and beta are
    d-vectors. A constant column maps to beta exactly.
    """
    if epsilon <= 0:
        raise ValueError(f"layer_norm epsilon must be positive, got {epsilon}")
    if x.ndim not in (1, 2):
        raise DimensionError(f"layer_norm: need a vector or matrix, got shape {x.shape}")
    if alpha.shape != (x.shape[0],) or beta.shape != (x.shape[0],):
        raise DimensionError(f"layer_norm: scale/bias shapes {alpha.shape}, {beta.shape} "
                             f"do not match input {x.shape}")

    original = x.shape
    columns = x.values.reshape(x.shape[0], -1)
    count = columns.shape[0]

    centered = columns - columns.mean(axis=0, keepdims=True)
    constant = np.all(columns == columns[:1], axis=0)
    centered[:, constant] = 0.0
    inv_std = 1.0 / np.sqrt(np.mean(centered * centered, axis=0, keepdims=True) + epsilon)
    normalized = centered * inv_std

    alpha_values, beta_values = alpha.values[:, None], beta.values[:, None]
    out = (alpha_values * normalized + beta_values).reshape(original)

    def local_gradient(g):
        g2 = g.reshape(count, -1)
        d_normalized = g2 * alpha_values
        grad_x = inv_std / count * (
            count * d_normalized
            - d_normalized.sum(axis=0, keepdims=True)
            - normalized * np.sum(d_normalized * normalized, axis=0, keepdims=True)
        )
        grad_alpha = np.sum(g2 * normalized, axis=1)
        grad_beta = g2.sum(axis=1)
        return grad_x.reshape(original), grad_alpha, grad_beta

    return _result('layer_norm', out, (x, alpha, beta), local_gradient)


def elementwise(op: str, *operands, factor: Optional[float] = None) -> Tensor:
    """
    Dispatch a pointwise primitive by name.

    Args:
        op: One of add, sub, mul, relu, sigmoid, scale
        operands: One tensor (relu, sigmoid, scale) or two (add, sub, mul)
        factor: Constant for ``scale``
    """
    binary = {'add': add, 'sub': sub, 'mul': mul}
    unary = {'relu': relu, 'sigmoid': sigmoid}
    if op in binary:
        return binary[op](*operands)
    if op in unary:
        return unary[op](as_tensor(operands[0]))
    if op == 'scale':
        return scale(as_tensor(operands[0]), factor if factor is not None else operands[1])
    raise ValueError(f"unknown elementwise op {op!r}")
