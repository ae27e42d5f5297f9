"""Tests for the assembled network, its variants and the checkpoint format."""
import sys
from pathlib import Path

import numpy as np
import pytest

# Add project root to path
project_root = Path(__file__).parent.parent
if str(project_root) not in sys.path:
    sys.path.insert(0, str(project_root))

from conftest import make_instance, reference_attention, reference_block, sigmoid, softmax, tiny_config
from src.autograd import current_tape, no_grad
from src.domain import Session, TrainingInstance
from src.errors import CheckpointError, ConfigError, ContractError
from src.recommender import (
    Checkpoint,
    ModelConfig,
    TLSRecModel,
    Variant,
    load_checkpoint,
    parameter_count,
    parse_variant,
    save_checkpoint,
)
from src.recommender.checkpoint import MAGIC, checkpoint_bytes, parse_checkpoint
from src.recommender.layers import causal_mask


USERS, ITEMS = 2, 10
# d=8, h=2, T=3, C=4 with N=2, M=10
FULL_PARAMETERS = 1440


@pytest.fixture
def instance(rng):
    return make_instance(rng, T=3, m=2, item_count=ITEMS, user_id=1, delta=2)


def test_full_parameter_count():
    assert parameter_count(tiny_config(), USERS, ITEMS) == FULL_PARAMETERS
    model = TLSRecModel.create(tiny_config(), USERS, ITEMS)
    assert model.params.count() == FULL_PARAMETERS


@pytest.mark.parametrize("variant, difference", [
    ('-S', -192),
    ('-L', -848),
    ('-M', 0),
    ('G+A', -232),
    ('G+S', -40),
    ('G+M', 24),
])
def test_variant_parameter_counts(variant, difference):
    assert parameter_count(tiny_config(variant=variant), USERS, ITEMS) == FULL_PARAMETERS + difference


@pytest.mark.parametrize("variant", list(Variant))
def test_every_variant_scores_all_items(variant, instance):
    model = TLSRecModel.create(tiny_config(variant=variant), USERS, ITEMS, seed=3)
    recorded = len(current_tape())
    scores = model.score_instance(instance)
    assert scores.shape == (ITEMS,)
    assert np.all((scores > 0) & (scores < 1))
    assert len(current_tape()) == recorded


def test_single_head_variant_matches_full_model_with_one_head(instance):
    single = TLSRecModel.create(tiny_config(variant='-M'), USERS, ITEMS, seed=11)
    one_head = TLSRecModel.create(tiny_config(h=1), USERS, ITEMS, seed=11)
    assert single.params.names() == one_head.params.names()
    assert np.array_equal(single.score_instance(instance), one_head.score_instance(instance))


def test_no_long_attention_variant_has_no_blocks(instance):
    model = TLSRecModel.create(tiny_config(variant='-L'), USERS, ITEMS)
    assert 'position_embeddings' not in model.params
    assert not any(name.startswith('block') for name in model.params)
    trace = model.forward(instance)
    with pytest.raises(ContractError):
        trace.session_attention()


def test_session_attention_is_lower_triangular(instance):
    trace = TLSRecModel.create(tiny_config(), USERS, ITEMS).forward(instance)
    weights = trace.session_attention()
    assert weights.shape == (3, 3)
    assert np.all(weights[causal_mask(3)] == 0.0)
    np.testing.assert_allclose(weights.sum(axis=1), 1.0, atol=1e-12)


def test_gate_sweep(instance):
    model = TLSRecModel.create(tiny_config(), USERS, ITEMS, seed=2)
    sweep = model.gate_sweep(instance)
    assert sweep.shape == (4, 8)
    assert np.all((sweep > 0) & (sweep < 1))

    trace = model.forward(instance, delta=3)
    np.testing.assert_allclose(sweep[2], trace.gate.values, atol=1e-12)


@pytest.mark.parametrize("variant", ['G+A', 'G+S', 'G+M'])
def test_gate_sweep_needs_a_gate(variant, instance):
    model = TLSRecModel.create(tiny_config(variant=variant), USERS, ITEMS)
    with pytest.raises(ContractError):
        model.gate_sweep(instance)


def test_forward_matches_scalar_computation():
    config = ModelConfig(d=4, h=2, T=2, m=2, C=3, dropout_rate=0.0)
    model = TLSRecModel.create(config, user_count=1, item_count=2, seed=6)
    rng = np.random.default_rng(21)
    for tensor in model.params.tensors():
        tensor.values[...] = rng.normal(scale=0.5, size=tensor.shape)
    instance = TrainingInstance(
        user_id=0,
        input_sessions=(Session((0, 1), 0, 60), Session((1, 1), 4000, 4100)),
        target_items=(1,),
        time_lag_seconds=7200,
        delta_index=2,
        target_start_ts=11300,
    )

    p = {name: tensor.values for name, tensor in model.params.items()}
    E, u = p['item_embeddings'], p['user_embeddings'][:, 0]
    S = np.column_stack([
        reference_attention(p['short.query'], p['short.key'], p['short.value'], E[:, list(s.item_ids)]).sum(axis=1)
        for s in instance.input_sessions
    ])
    heads = [tuple(p[f'block0.head{j}.{role}'] for role in ('query', 'key', 'value')) for j in range(2)]
    A = reference_block(S + p['position_embeddings'], heads, p['block0.output'],
                        p['block0.norm_scale'], p['block0.norm_shift'],
                        p['block0.ffn_in_weight'], p['block0.ffn_in_bias'],
                        p['block0.ffn_out_weight'], p['block0.ffn_out_bias'], config.layer_norm_eps)
    logits = [float(np.dot(np.maximum(p['long.weight'] @ A[:, t] + p['long.bias'], 0.0), u)) for t in range(2)]
    long = A @ softmax(logits)
    short = S[:, -1]
    g = sigmoid(p['gate.long'] @ long + p['gate.short'] @ short + p['gate.lag'] @ p['lag_embeddings'][:, 1]
                + p['gate.bias'])
    z = g * short + (1.0 - g) * long

    with no_grad():
        trace = model.forward(instance)
    np.testing.assert_allclose(trace.attentional_embeddings.values, A, rtol=0, atol=1e-9)
    np.testing.assert_allclose(trace.long_weights.values, softmax(logits), rtol=0, atol=1e-9)
    np.testing.assert_allclose(trace.gate.values, g, rtol=0, atol=1e-9)
    np.testing.assert_allclose(trace.user_embedding.values, z, rtol=0, atol=1e-9)
    np.testing.assert_allclose(model.score_instance(instance), sigmoid(E.T @ z), rtol=0, atol=1e-9)


def test_later_sessions_do_not_change_earlier_positions(instance):
    model = TLSRecModel.create(tiny_config(), USERS, ITEMS, seed=9)
    with no_grad():
        before = model.forward(instance)
        for position in range(2):
            sessions = list(instance.input_sessions)
            for t in range(position + 1, len(sessions)):
                s = sessions[t]
                sessions[t] = Session(tuple((i + 1 + t) % ITEMS for i in s.item_ids), s.start_ts, s.end_ts)
            after = model.forward(instance.with_sessions(tuple(sessions)))

            kept = slice(0, position + 1)
            assert np.array_equal(after.attentional_embeddings.values[:, kept],
                                  before.attentional_embeddings.values[:, kept])
            assert np.array_equal(after.session_attention()[kept], before.session_attention()[kept])
            assert not np.array_equal(after.attentional_embeddings.values, before.attentional_embeddings.values)


@pytest.mark.parametrize("variant", ['full', 'G+A'])
def test_fused_embedding_lies_between_long_and_short(variant, rng):
    model = TLSRecModel.create(tiny_config(variant=variant), USERS, ITEMS, seed=12)
    with no_grad():
        for _ in range(20):
            candidate = make_instance(rng, T=3, m=2, item_count=ITEMS, user_id=int(rng.integers(0, USERS)),
                                      delta=int(rng.integers(1, 5)))
            trace = model.forward(candidate)
            short, long = trace.short_embedding.values, trace.long_embedding.values
            fused = trace.user_embedding.values
            assert np.all(fused >= np.minimum(short, long) - 1e-12)
            assert np.all(fused <= np.maximum(short, long) + 1e-12)


def test_ratings_follow_the_candidate_order(instance, rng):
    model = TLSRecModel.create(tiny_config(), USERS, ITEMS, seed=13)
    item_ids = np.arange(ITEMS)
    with no_grad():
        trace = model.forward(instance)
        ratings = model.rate(trace, item_ids).values
        for _ in range(5):
            order = rng.permutation(ITEMS)
            permuted = model.rate(trace, item_ids[order]).values
            np.testing.assert_allclose(permuted, ratings[order], rtol=0, atol=1e-12)
        np.testing.assert_allclose(model.score_all_items(trace).values, ratings, rtol=0, atol=1e-12)


def test_dropout_only_in_training(instance):
    model = TLSRecModel.create(tiny_config(dropout_rate=0.5), USERS, ITEMS)
    eval_a = model.forward(instance).user_embedding.values
    eval_b = model.forward(instance).user_embedding.values
    train_a = model.forward(instance, training=True, rng=np.random.default_rng(1)).user_embedding.values
    train_b = model.forward(instance, training=True, rng=np.random.default_rng(2)).user_embedding.values
    current_tape().clear()

    assert np.array_equal(eval_a, eval_b)
    assert not np.array_equal(train_a, train_b)


def test_instance_shape_must_match(rng):
    model = TLSRecModel.create(tiny_config(), USERS, ITEMS)
    with pytest.raises(ContractError):
        model.forward(make_instance(rng, T=2, m=2, item_count=ITEMS))
    with pytest.raises(ContractError):
        model.forward(make_instance(rng, T=3, m=3, item_count=ITEMS))


def test_parse_variant_aliases():
    assert parse_variant('full') is Variant.FULL
    assert parse_variant('-S') is Variant.NO_SHORT_ATTENTION
    assert parse_variant('TLSRec-L') is Variant.NO_LONG_ATTENTION
    assert parse_variant('−M') is Variant.SINGLE_HEAD
    assert parse_variant('g+a') is Variant.GATE_AVERAGE
    assert parse_variant('TLSRec-G+S') is Variant.GATE_SELF_ATTENTION
    assert parse_variant('gate_multihead') is Variant.GATE_MULTIHEAD
    with pytest.raises(ConfigError) as excinfo:
        parse_variant('-X')
    assert 'G+A' in str(excinfo.value)


def test_config_rejects_indivisible_heads():
    with pytest.raises(ValueError):
        tiny_config(d=6, h=4)


def test_checkpoint_bytes_round_trip():
    model = TLSRecModel.create(tiny_config(variant='G+M'), USERS, ITEMS, seed=4)
    checkpoint = Checkpoint(model.config, model.params, USERS, ITEMS, {'epoch': 3})
    data = checkpoint_bytes(checkpoint)
    restored = parse_checkpoint(data)

    assert data.startswith(MAGIC)
    assert checkpoint_bytes(restored) == data
    assert restored.config == model.config
    assert restored.metadata == {'epoch': 3}
    for name, tensor in model.params.items():
        assert np.array_equal(restored.params[name].values, tensor.values)


def test_saved_checkpoint_scores_identically(tmp_path, instance):
    model = TLSRecModel.create(tiny_config(), USERS, ITEMS, seed=8)
    path = save_checkpoint(Checkpoint(model.config, model.params, USERS, ITEMS), tmp_path / 'ckpt' / 'model.ckpt')
    restored = load_checkpoint(path).model()
    assert np.array_equal(restored.score_instance(instance), model.score_instance(instance))


def test_corrupt_checkpoints_are_rejected(tmp_path):
    model = TLSRecModel.create(tiny_config(), USERS, ITEMS)
    data = checkpoint_bytes(Checkpoint(model.config, model.params, USERS, ITEMS))

    with pytest.raises(CheckpointError):
        parse_checkpoint(b'NOTACKPT' + data[8:])
    with pytest.raises(CheckpointError) as excinfo:
        parse_checkpoint(data + b'\x00' * 8)
    assert 'trailing' in str(excinfo.value)
    with pytest.raises(CheckpointError) as excinfo:
        parse_checkpoint(data[:-8])
    assert 'truncated' in str(excinfo.value)
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / 'absent.ckpt')


def test_checkpoint_rejects_mismatched_parameters():
    model = TLSRecModel.create(tiny_config(), USERS, ITEMS)
    with pytest.raises(ContractError):
        checkpoint_bytes(Checkpoint(tiny_config(variant='G+A'), model.params, USERS, ITEMS))


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
