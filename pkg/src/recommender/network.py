"""The TLSRec network: from a padded instance to ratings over all items."""
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from src.autograd import Tensor, no_grad
from src.autograd import ops
from src.domain import TrainingInstance
from src.errors import ContractError
from src.recommender import layers
from src.recommender.config import ModelConfig, Variant
from src.recommender.parameters import ParameterSet, block_prefix


@dataclass
class ForwardTrace:
    """
    Every intermediate of one forward pass.

    Tensors stay attached to the tape in training mode; the numpy fields are
    detached copies for inspection.
    """
    session_embeddings: Tensor
    short_embedding: Tensor
    attentional_embeddings: Tensor
    long_weights: Tensor
    long_embedding: Tensor
    user_embedding: Tensor
    gate: Optional[Tensor] = None
    block_attention: List[List[np.ndarray]] = field(default_factory=list)
    fusion_attention: List[np.ndarray] = field(default_factory=list)

    def session_attention(self, block: int = -1) -> np.ndarray:
        """T×T session attention of one block, averaged over heads."""
        if not self.block_attention:
            raise ContractError("this variant has no session-level attention blocks")
        return np.mean(np.stack(self.block_attention[block]), axis=0)

    def preference_attention(self) -> np.ndarray:
        """2×2 long/short fusion attention, averaged over heads."""
        if not self.fusion_attention:
            raise ContractError("this variant does not fuse by attention")
        return np.mean(np.stack(self.fusion_attention), axis=0)


class TLSRecModel:
    """
    Forward computation of one model configuration over a parameter set.

    The model holds no state besides its configuration and parameters;
    dropout randomness comes from the generator passed to ``forward``.
    """

    def __init__(self, config: ModelConfig, params: ParameterSet):
        """
        Initialize model.

        Args:
            config: Model configuration (variant included)
            params: Parameters created for the same configuration
        """
        self.config = config
        self.params = params
        self.blocks = [self._block_parameters(b) for b in range(config.block_count)] \
            if config.variant.uses_blocks else []

    @classmethod
    def create(cls, config: ModelConfig, user_count: int, item_count: int, seed: int = 0) -> 'TLSRecModel':
        """Model with freshly initialized parameters."""
        return cls(config, ParameterSet.initialize(config, user_count, item_count, seed))

    @property
    def item_count(self) -> int:
        return self.params['item_embeddings'].shape[1]

    @property
    def user_count(self) -> int:
        return self.params['user_embeddings'].shape[1]

    def _block_parameters(self, block: int) -> layers.BlockParameters:
        prefix = block_prefix(block)
        p = self.params
        heads = [
            layers.HeadProjection(p[f'{prefix}.head{j}.query'], p[f'{prefix}.head{j}.key'], p[f'{prefix}.head{j}.value'])
            for j in range(self.config.effective_heads)
        ]
        return layers.BlockParameters(
            heads=heads,
            output=p[f'{prefix}.output'],
            norm_scale=p[f'{prefix}.norm_scale'],
            norm_shift=p[f'{prefix}.norm_shift'],
            ffn_in_weight=p[f'{prefix}.ffn_in_weight'],
            ffn_in_bias=p[f'{prefix}.ffn_in_bias'],
            ffn_out_weight=p[f'{prefix}.ffn_out_weight'],
            ffn_out_bias=p[f'{prefix}.ffn_out_bias'],
        )

    def _fusion_heads(self) -> List[layers.HeadProjection]:
        p = self.params
        if self.config.variant is Variant.GATE_SELF_ATTENTION:
            return [layers.HeadProjection(p['fusion.query'], p['fusion.key'], p['fusion.value'])]
        return [
            layers.HeadProjection(p[f'fusion.head{j}.query'], p[f'fusion.head{j}.key'], p[f'fusion.head{j}.value'])
            for j in range(self.config.h)
        ]

    def _check_instance(self, instance: TrainingInstance):
        config = self.config
        if len(instance.input_sessions) != config.T:
            raise ContractError(f"instance has {len(instance.input_sessions)} input sessions, model expects T={config.T}")
        lengths = {len(s) for s in instance.input_sessions}
        if lengths != {config.m}:
            raise ContractError(f"instance sessions have lengths {sorted(lengths)}, model expects m={config.m}")

    def forward(self, instance: TrainingInstance, training: bool = False,
                rng: Optional[np.random.Generator] = None, delta: Optional[int] = None) -> ForwardTrace:
        """
        Run the network on one padded instance.

        Args:
            instance: Instance with T sessions of m items
            training: Enables dropout (needs ``rng``)
            rng: Generator for dropout masks
            delta: Overrides the instance's discretized lag

        Returns:
            ForwardTrace ending in the fused user embedding

        Raises:
            ContractError: If the instance shape does not match the configuration
        """
        self._check_instance(instance)
        config, p = self.config, self.params

        def dropout_at(site: str):
            rate = config.dropout_at(site)
            return lambda x: ops.dropout(x, rate, rng, training)

        items = layers.embed_session_items(instance.item_matrix(), p['item_embeddings'])
        items = dropout_at('items')(items)

        if config.variant.uses_short_attention:
            sessions = layers.short_term_session_embedding(items, p['short.query'], p['short.key'], p['short.value'])
        else:
            sessions = layers.mean_pool_items(items)
        short = ops.select_column(sessions, config.T - 1)
        user = ops.select_column(p['user_embeddings'], instance.user_id)

        attentional = sessions
        block_attention = []
        if self.blocks:
            attentional = layers.inject_positions(sessions, p['position_embeddings'])
            mask = layers.causal_mask(config.T)
            for block in self.blocks:
                out = layers.multi_head_block(attentional, block, config.layer_norm_eps, mask, dropout_at('ffn'))
                attentional = out.output
                block_attention.append(out.head_weights)

        long, long_weights = layers.long_term_pool(attentional, user, p['long.weight'], p['long.bias'])

        gate, fusion_attention = None, []
        variant = config.variant
        if variant.uses_gate:
            gate, fused = layers.time_gate(
                long, short, instance.delta_index if delta is None else delta,
                p['lag_embeddings'], p['gate.long'], p['gate.short'], p['gate.lag'], p['gate.bias'],
                dropout_at('gate'),
            )
        elif variant is Variant.GATE_AVERAGE:
            fused = layers.fuse_average(long, short)
        else:
            output = p['fusion.output'] if variant is Variant.GATE_MULTIHEAD else None
            fused, fusion_attention = layers.fuse_attention(long, short, self._fusion_heads(), output)

        return ForwardTrace(
            session_embeddings=sessions,
            short_embedding=short,
            attentional_embeddings=attentional,
            long_weights=long_weights,
            long_embedding=long,
            user_embedding=fused,
            gate=gate,
            block_attention=block_attention,
            fusion_attention=fusion_attention,
        )

    def rate(self, trace: ForwardTrace, item_ids: Sequence[int]) -> Tensor:
        """Ratings of the listed items (differentiable)."""
        return layers.rate_items(trace.user_embedding, item_ids, self.params['item_embeddings'])

    def score_all_items(self, trace: ForwardTrace) -> Tensor:
        return layers.score_all_items(trace.user_embedding, self.params['item_embeddings'])

    def score_instance(self, instance: TrainingInstance) -> np.ndarray:
        """Evaluation-mode ratings of all M items for one instance."""
        with no_grad():
            trace = self.forward(instance, training=False)
            return self.score_all_items(trace).numpy()

    def gate_sweep(self, instance: TrainingInstance, deltas: Optional[Sequence[int]] = None) -> np.ndarray:
        """
        Gate vectors of one instance for every lag, in evaluation mode.

        Args:
            instance: Padded instance
            deltas: Lags to evaluate (defaults to 1..C)

        Returns:
            len(deltas)×d matrix, one gate vector per row
        """
        if not self.config.variant.uses_gate:
            raise ContractError(f"variant {self.config.variant.value} has no time gate")
        deltas = list(range(1, self.config.C + 1)) if deltas is None else list(deltas)
        p = self.params
        with no_grad():
            trace = self.forward(instance, training=False)
            rows = [
                layers.time_gate(trace.long_embedding, trace.short_embedding, delta, p['lag_embeddings'],
                                 p['gate.long'], p['gate.short'], p['gate.lag'], p['gate.bias'])[0].numpy()
                for delta in deltas
            ]
        return np.stack(rows) if rows else np.zeros((0, self.config.d))
