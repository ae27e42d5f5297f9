"""
Building blocks of the TLSRec network.

All functions work on column vectors: a matrix whose columns are items or
sessions has shape d×k, and the item blocks of all T sessions are handled
together as one T×d×m tensor. Attention weights are stored row-per-query,
so ``weights[i, j]`` is how much query i attends to key j.
"""
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from src.autograd import Tensor
from src.autograd import ops
from src.errors import ContractError, EmbeddingIndexError


# Maps a tensor to its dropped-out version (identity outside training)
DropoutFn = Callable[[Tensor], Tensor]


def _identity(x: Tensor) -> Tensor:
    return x


@dataclass
class HeadProjection:
    """Query, key and value projections of one attention head."""
    query: Tensor
    key: Tensor
    value: Tensor


@dataclass
class BlockParameters:
    """Parameters of one multi-head self-attention block."""
    heads: List[HeadProjection]
    output: Tensor
    norm_scale: Tensor
    norm_shift: Tensor
    ffn_in_weight: Tensor
    ffn_in_bias: Tensor
    ffn_out_weight: Tensor
    ffn_out_bias: Tensor


@dataclass
class BlockOutput:
    """
    Result of one block.

    ``attention_output`` is the projected multi-head output before the
    residual connection; ``head_weights`` holds one T×T matrix per head.
    """
    output: Tensor
    attention_output: Tensor
    head_weights: List[np.ndarray] = field(default_factory=list)


def embed_session_items(item_ids, item_embeddings: Tensor) -> Tensor:
    """
    Look up the item embeddings of one or all sessions.

    Args:
        item_ids: m ids of one session, or a T×m id matrix
        item_embeddings: d×M table

    Returns:
        d×m tensor (one session) or T×d×m tensor (all sessions)
    """
    return ops.embedding_lookup(item_embeddings, item_ids)


def attend(queries: Tensor, keys: Tensor, values: Tensor, scale: float,
           mask: Optional[np.ndarray] = None) -> Tuple[Tensor, Tensor]:
    """
    Scaled dot-product attention over column vectors.

    Output column i is Σ_j softmax_j(q_i·k_j / scale) v_j.

    Args:
        queries, keys, values: (…)×d_k×n tensors whose columns are positions
        scale: Divisor of the dot products
        mask: Boolean (n×n) array, True excludes key j for query i

    Returns:
        Tuple of (attended values, weights with one row per query)
    """
    scores = ops.scale(ops.matmul(ops.transpose(queries), keys), 1.0 / scale)
    weights = ops.softmax_over_keys(scores, mask)
    return ops.matmul(values, ops.transpose(weights)), weights


def item_attention(item_embeddings: Tensor, query: Tensor, key: Tensor, value: Tensor) -> Tuple[Tensor, Tensor]:
    """
    Self-attention among the items of each session (padded items included).

    Args:
        item_embeddings: d×m or T×d×m session item embeddings
        query, key, value: d×d projections shared across sessions

    Returns:
        Tuple of (attentional item embeddings, m×m weights per session)
    """
    d = item_embeddings.shape[-2]
    q = ops.matmul(query, item_embeddings)
    k = ops.matmul(key, item_embeddings)
    v = ops.matmul(value, item_embeddings)
    return attend(q, k, v, math.sqrt(d))


def _columns(pooled: Tensor) -> Tensor:
    """T×d per-session rows to a d×T matrix; d-vectors pass through."""
    return ops.transpose(pooled) if pooled.ndim == 2 else pooled


def short_term_session_embedding(item_embeddings: Tensor, query: Tensor, key: Tensor, value: Tensor) -> Tensor:
    """
    Session embedding as the sum of the attentional item embeddings.

    Returns:
        d-vector for one session, d×T matrix for T sessions
    """
    attended, _ = item_attention(item_embeddings, query, key, value)
    return _columns(ops.sum(attended, axis=-1))


def mean_pool_items(item_embeddings: Tensor) -> Tensor:
    """Session embedding as the plain mean of its item embeddings."""
    m = item_embeddings.shape[-1]
    return _columns(ops.scale(ops.sum(item_embeddings, axis=-1), 1.0 / m))


def inject_positions(sessions: Tensor, positions: Tensor) -> Tensor:
    """Add the position embedding of every session column."""
    if sessions.shape != positions.shape:
        raise ContractError(f"session matrix {sessions.shape} and positions {positions.shape} differ in shape")
    return ops.add(sessions, positions)


def causal_mask(length: int) -> np.ndarray:
    """length×length mask where query i may only see keys j <= i."""
    return np.triu(np.ones((length, length), dtype=bool), k=1)


def multi_head_block(inputs: Tensor, params: BlockParameters, epsilon: float,
                     mask: Optional[np.ndarray] = None, ffn_dropout: DropoutFn = _identity) -> BlockOutput:
    """
    Multi-head self-attention over sessions, residual plus layer norm, then FFN.

    Args:
        inputs: d×T position-aware session embeddings
        params: Block parameters; head projections are (d/h)×d
        epsilon: Layer-norm variance floor
        mask: Session mask, defaults to the causal mask
        ffn_dropout: Dropout applied to the FFN output

    Returns:
        BlockOutput with the d×T block output
    """
    d, T = inputs.shape
    if mask is None:
        mask = causal_mask(T)
    head_dim = params.heads[0].query.shape[0]
    if head_dim * len(params.heads) != d:
        raise ContractError(f"{len(params.heads)} heads of size {head_dim} do not cover d={d}")

    head_outputs, head_weights = [], []
    for head in params.heads:
        attended, weights = attend(
            ops.matmul(head.query, inputs),
            ops.matmul(head.key, inputs),
            ops.matmul(head.value, inputs),
            math.sqrt(head_dim),
            mask,
        )
        head_outputs.append(attended)
        head_weights.append(weights.numpy())

    attention_output = ops.matmul(params.output, ops.concat(head_outputs, axis=0))
    normalized = ops.layer_norm(ops.add(inputs, attention_output), params.norm_scale, params.norm_shift, epsilon)

    hidden = ops.relu(ops.add_bias(ops.matmul(params.ffn_in_weight, normalized), params.ffn_in_bias))
    output = ops.add_bias(ops.matmul(params.ffn_out_weight, hidden), params.ffn_out_bias)
    return BlockOutput(ffn_dropout(output), attention_output, head_weights)


def long_term_pool(sessions: Tensor, user_embedding: Tensor, weight: Tensor, bias: Tensor) -> Tuple[Tensor, Tensor]:
    """
    Attention-pool session embeddings with the user embedding as query.

    Args:
        sessions: d×T attentional session embeddings
        user_embedding: d-vector
        weight, bias: d×d projection and d bias

    Returns:
        Tuple of (d-vector long-term embedding, T attention weights)
    """
    hidden = ops.relu(ops.add_bias(ops.matmul(weight, sessions), bias))
    logits = ops.matmul(ops.transpose(hidden), user_embedding)
    weights = ops.softmax_over_keys(logits)
    return ops.matmul(sessions, weights), weights


def time_gate(long_embedding: Tensor, short_embedding: Tensor, delta: int, lag_embeddings: Tensor,
              long_weight: Tensor, short_weight: Tensor, lag_weight: Tensor, bias: Tensor,
              gate_dropout: DropoutFn = _identity) -> Tuple[Tensor, Tensor]:
    """
    Mix short- and long-term embeddings dimension-wise by a lag-aware gate.

    Args:
        long_embedding, short_embedding: d-vectors
        delta: Discretized lag in [1, C]; selects column delta of the d×C table
        lag_embeddings: d×C time-lag table
        long_weight, short_weight, lag_weight: d×d gate projections
        bias: d gate bias
        gate_dropout: Dropout on the pre-sigmoid input

    Returns:
        Tuple of (gate g in (0,1)^d, fused embedding)

    Raises:
        EmbeddingIndexError: If delta is outside [1, C]
    """
    delta = int(delta)
    if not 1 <= delta <= lag_embeddings.shape[1]:
        raise EmbeddingIndexError(f"time lag index {delta} outside [1, {lag_embeddings.shape[1]}]")
    lag = ops.select_column(lag_embeddings, delta - 1)
    pre_activation = ops.add(
        ops.add(ops.matmul(long_weight, long_embedding), ops.matmul(short_weight, short_embedding)),
        ops.add(ops.matmul(lag_weight, lag), bias),
    )
    gate = ops.sigmoid(gate_dropout(pre_activation))
    complement = ops.sub(Tensor(np.ones(gate.shape)), gate)
    fused = ops.add(ops.mul(gate, short_embedding), ops.mul(complement, long_embedding))
    return gate, fused


def fuse_average(long_embedding: Tensor, short_embedding: Tensor) -> Tensor:
    """Plain average of the two preference embeddings."""
    return ops.scale(ops.add(short_embedding, long_embedding), 0.5)


def fuse_attention(long_embedding: Tensor, short_embedding: Tensor, heads: Sequence[HeadProjection],
                   output: Optional[Tensor] = None) -> Tuple[Tensor, List[np.ndarray]]:
    """
    Let the two preference embeddings attend to each other, then sum them.

    One head without ``output`` is single-head attention; several heads are
    concatenated and projected by ``output``.

    Returns:
        Tuple of (fused d-vector, 2×2 weights per head)
    """
    pair = ops.stack_columns([long_embedding, short_embedding])
    head_dim = heads[0].query.shape[0]
    attended, weights = [], []
    for head in heads:
        values, head_weights = attend(
            ops.matmul(head.query, pair),
            ops.matmul(head.key, pair),
            ops.matmul(head.value, pair),
            math.sqrt(head_dim),
        )
        attended.append(values)
        weights.append(head_weights.numpy())

    combined = attended[0] if len(attended) == 1 else ops.concat(attended, axis=0)
    if output is not None:
        combined = ops.matmul(output, combined)
    return ops.sum(combined, axis=1), weights


def predict_rating(user_embedding: Tensor, item_id: int, item_embeddings: Tensor) -> Tensor:
    """sigmoid(z_u · e_v) for one item, as a scalar tensor."""
    item = ops.select_column(item_embeddings, item_id)
    return ops.sigmoid(ops.sum(ops.mul(user_embedding, item)))


def rate_items(user_embedding: Tensor, item_ids, item_embeddings: Tensor) -> Tensor:
    """Ratings of the listed items, one per id."""
    items = ops.embedding_lookup(item_embeddings, np.asarray(item_ids, dtype=np.int64))
    return ops.sigmoid(ops.matmul(ops.transpose(items), user_embedding))


def score_all_items(user_embedding: Tensor, item_embeddings: Tensor) -> Tensor:
    """Ratings of all M items in one product."""
    return ops.sigmoid(ops.matmul(ops.transpose(item_embeddings), user_embedding))
