"""Tests for the BPR loss, the Adam update and the training loop."""
import math
import sys
from collections import OrderedDict
from pathlib import Path

import numpy as np
import pytest

# Add project root to path
project_root = Path(__file__).parent.parent
if str(project_root) not in sys.path:
    sys.path.insert(0, str(project_root))

from conftest import make_instance, tiny_config
from src.autograd import Tensor, gradient_check
from src.errors import ContractError, DivergenceError
from src.recommender import ModelConfig, ParameterSet, TLSRecModel
from src.recommender.checkpoint import checkpoint_bytes
from src.training import OptimizerState, TrainConfig, Trainer, adam_step, bpr_batch_loss, train


def memorization_model_config(**overrides) -> ModelConfig:
    values = dict(d=8, h=2, T=3, m=1, C=8, dropout_rate=0.0)
    values.update(overrides)
    return ModelConfig(**values)


def quiet_train_config(**overrides) -> TrainConfig:
    values = dict(learning_rate=0.01, batch_size=16, epochs=2, lambda_reg=0.0, seed=7,
                  early_stop_patience=50, validation_k=1)
    values.update(overrides)
    return TrainConfig(**values)


def test_bpr_loss_value():
    loss = bpr_batch_loss(Tensor([0.9, 0.6]), Tensor([0.1, 0.7]))
    expected = -(math.log(1 / (1 + math.exp(-0.8))) + math.log(1 / (1 + math.exp(0.1))))
    assert loss.item() == pytest.approx(expected, abs=1e-12)


def test_bpr_loss_adds_weighted_l2():
    parameter = Tensor([1.0, 2.0], requires_grad=True)
    plain = bpr_batch_loss([Tensor([0.5])], [Tensor([0.5])])
    regularized = bpr_batch_loss([Tensor([0.5])], [Tensor([0.5])], [parameter], lambda_reg=0.5)
    assert plain.item() == pytest.approx(math.log(2.0), abs=1e-12)
    assert regularized.item() - plain.item() == pytest.approx(2.5, abs=1e-12)


def test_bpr_loss_contract():
    with pytest.raises(ContractError):
        bpr_batch_loss([], [])
    with pytest.raises(ContractError):
        bpr_batch_loss(Tensor([0.5, 0.4]), Tensor([0.1]))


def test_adam_with_constant_gradient_moves_by_learning_rate():
    theta = np.array([0.5, -1.0, 2.0])
    g = np.array([0.3, -2.0, 1e-3])
    params = ParameterSet.from_arrays(OrderedDict(w=theta.copy()))
    config = TrainConfig(learning_rate=0.01)
    state = OptimizerState()

    steps = 25
    for _ in range(steps):
        adam_step(params, {'w': g}, state, config)

    expected = theta - steps * 0.01 * g / (np.abs(g) + 1e-8)
    np.testing.assert_allclose(params['w'].values, expected, rtol=1e-9, atol=1e-12)
    assert state.step == steps


def test_adam_rejects_misshapen_gradients():
    params = ParameterSet.from_arrays(OrderedDict(w=np.zeros(3)))
    with pytest.raises(ContractError):
        adam_step(params, {'w': np.zeros(2)}, OptimizerState(), TrainConfig())


def test_adam_with_zero_gradient_is_a_no_op():
    theta = np.array([[0.25, -0.5], [1.5, 0.0]])
    params = ParameterSet.from_arrays(OrderedDict(w=theta.copy()))
    state = adam_step(params, {'w': np.zeros_like(theta)}, OptimizerState(), TrainConfig(learning_rate=0.1))
    assert np.array_equal(params['w'].values, theta)
    assert state.step == 1


def test_two_steps_differ_from_one_doubled_step():
    theta = np.array([1.0, -2.0, 0.5])

    def run(learning_rate, steps, gradient):
        params = ParameterSet.from_arrays(OrderedDict(w=theta.copy()))
        state, config = OptimizerState(), TrainConfig(learning_rate=learning_rate)
        for _ in range(steps):
            adam_step(params, {'w': gradient(params['w'].values)}, state, config)
        return params['w'].values

    def quadratic(w):
        # Gradient of ½‖w‖², re-evaluated after every step
        return w.copy()

    def constant(w):
        return theta.copy()

    two_steps, doubled = run(0.1, 2, quadratic), run(0.2, 1, quadratic)
    assert np.all(np.abs(two_steps - doubled) > 1e-5)

    np.testing.assert_allclose(run(0.1, 2, constant), run(0.2, 1, constant), rtol=0, atol=1e-12)


def test_full_model_gradient_matches_finite_differences(rng):
    config = tiny_config()
    model = TLSRecModel.create(config, user_count=2, item_count=8, seed=5)
    instance = make_instance(rng, T=3, m=2, item_count=8, user_id=1, delta=3, targets=(2, 5))
    negatives = [0, 7]

    def loss():
        trace = model.forward(instance, training=False)
        return bpr_batch_loss(model.rate(trace, instance.target_items), model.rate(trace, negatives),
                              model.params.tensors(), lambda_reg=1e-3)

    assert gradient_check(loss, model.params.tensors()) < 1e-2


def test_training_is_deterministic(memorization_split):
    first = train(memorization_split, memorization_model_config(), quiet_train_config(), show_progress=False)
    second = train(memorization_split, memorization_model_config(), quiet_train_config(), show_progress=False)
    assert checkpoint_bytes(first.checkpoint) == checkpoint_bytes(second.checkpoint)
    assert [r.to_dict()['train_loss'] for r in first.history] == [r.to_dict()['train_loss'] for r in second.history]


def test_zero_epochs_returns_initial_parameters(memorization_split):
    model_config = memorization_model_config()
    result = train(memorization_split, model_config, quiet_train_config(epochs=0), show_progress=False)
    initial = ParameterSet.initialize(model_config, memorization_split.user_count, memorization_split.item_count, 7)

    assert result.history == []
    assert result.best_epoch == 0
    for name, values in initial.state().items():
        assert np.array_equal(result.checkpoint.params[name].values, values)


def test_strong_regularization_shrinks_parameters(memorization_split):
    model_config = memorization_model_config()
    initial = ParameterSet.initialize(model_config, memorization_split.user_count, memorization_split.item_count, 7)
    result = train(memorization_split, model_config, quiet_train_config(epochs=3, lambda_reg=10.0),
                   show_progress=False)
    assert result.checkpoint.params.squared_norm() < initial.squared_norm()


def test_huge_regularization_shrinks_the_norm_every_epoch(memorization_split):
    model_config = memorization_model_config()
    initial = ParameterSet.initialize(model_config, memorization_split.user_count, memorization_split.item_count, 7)
    result = train(memorization_split, model_config, quiet_train_config(epochs=4, lambda_reg=1e3),
                   show_progress=False)

    norms = [math.sqrt(initial.squared_norm())] + [record.param_norm for record in result.history]
    assert len(norms) == 5
    assert all(later < earlier for earlier, later in zip(norms, norms[1:]))


def test_memorization_loss_falls_in_early_epochs(memorization_split):
    result = train(memorization_split, memorization_model_config(), quiet_train_config(epochs=6),
                   show_progress=False)
    losses = [record.train_loss for record in result.history]
    assert len(losses) == 6
    assert sum(later <= earlier for earlier, later in zip(losses, losses[1:])) >= 4


def test_epoch_records_reach_the_callback(memorization_split):
    records = []
    train(memorization_split, memorization_model_config(), quiet_train_config(epochs=2),
          show_progress=False, epoch_callback=records.append)
    assert [r['epoch'] for r in records] == [1, 2]
    assert set(records[0]) == {'epoch', 'train_loss', 'val_hit@1', 'val_map@1', 'param_norm', 'wall_seconds'}


def test_non_finite_parameters_raise_divergence(memorization_split):
    trainer = Trainer(memorization_model_config(), quiet_train_config(), memorization_split, show_progress=False)
    trainer.params['item_embeddings'].values[0, 0] = np.nan
    with pytest.raises(DivergenceError) as excinfo:
        trainer.train()
    assert 'epoch 1' in str(excinfo.value)


def test_trainer_checks_the_split_shape(memorization_split):
    with pytest.raises(ContractError):
        Trainer(memorization_model_config(C=4), quiet_train_config(), memorization_split)


@pytest.mark.slow
def test_memorization_corpus_is_learned_exactly(memorization_split):
    model_config = ModelConfig(d=16, h=2, T=3, m=1, C=8, dropout_rate=0.0)
    train_config = TrainConfig(learning_rate=0.01, batch_size=16, epochs=200, lambda_reg=0.0,
                               early_stop_patience=20, validation_k=1, seed=0)
    result = train(memorization_split, model_config, train_config, show_progress=False)
    assert result.best_metric == 1.0


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
