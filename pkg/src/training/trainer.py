"""Mini-batch BPR training with early stopping on validation Hit@k."""
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np
from tqdm import tqdm

from src.autograd import backward, current_tape
from src.config.settings import Settings
from src.domain import DatasetSplit
from src.errors import ContractError, DivergenceError
from src.evaluation.evaluator import check_model_matches_split, evaluate
from src.processors.negative_sampler import sample_negatives
from src.recommender.checkpoint import Checkpoint
from src.recommender.config import ModelConfig
from src.recommender.network import TLSRecModel
from src.recommender.parameters import ParameterSet
from src.training.config import TrainConfig
from src.training.loss import bpr_batch_loss
from src.training.optimizer import Adam
from src.utils.logger import logger


@dataclass
class EpochRecord:
    """One line of the epoch log."""
    epoch: int
    train_loss: float
    val_hit: Optional[float]
    val_map: Optional[float]
    param_norm: float
    wall_seconds: float
    k: int = 20

    def to_dict(self) -> Dict:
        return {
            'epoch': self.epoch,
            'train_loss': self.train_loss,
            f'val_hit@{self.k}': self.val_hit,
            f'val_map@{self.k}': self.val_map,
            'param_norm': self.param_norm,
            'wall_seconds': round(self.wall_seconds, 3),
        }


@dataclass
class TrainResult:
    """Best checkpoint plus the per-epoch history."""
    checkpoint: Checkpoint
    history: List[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    best_metric: Optional[float] = None


class Trainer:
    """
    Optimize a TLSRec model on the training portion of a split.

    Each epoch shuffles the training instances, draws fresh negatives and
    runs one Adam step per mini-batch on the summed BPR loss. After every
    epoch the validation Hit@k decides whether the parameters become the new
    best checkpoint; training stops after ``early_stop_patience`` epochs
    without improvement.
    """

    def __init__(self, model_config: ModelConfig, train_config: TrainConfig, split: DatasetSplit,
                 show_progress: bool = None, epoch_callback: Callable[[Dict], None] = None):
        """
        Initialize trainer.

        Args:
            model_config: Architecture and variant
            train_config: Optimization settings
            split: Padded dataset split
            show_progress: tqdm bars (defaults to Settings.SHOW_PROGRESS)
            epoch_callback: Called with every epoch record (e.g. a JSONL appender)
        """
        if not split.train:
            raise ContractError("training split is empty")
        check_model_matches_split(model_config, split.user_count, split.item_count, split)

        self.model_config = model_config
        self.config = train_config
        self.split = split
        self.show_progress = Settings.SHOW_PROGRESS if show_progress is None else show_progress
        self.epoch_callback = epoch_callback

        seeds = np.random.SeedSequence(train_config.seed).spawn(3)
        self.shuffle_rng, self.negative_rng, self.dropout_rng = (np.random.default_rng(s) for s in seeds)

        self.params = ParameterSet.initialize(model_config, split.user_count, split.item_count, train_config.seed)
        self.model = TLSRecModel(model_config, self.params)
        self.optimizer = Adam(self.params, train_config)

    def batch_loss(self, batch: List, training: bool = True):
        """Summed BPR loss of a batch of instances (records on the tape)."""
        positives, negatives = [], []
        for instance in batch:
            trace = self.model.forward(instance, training=training, rng=self.dropout_rng)
            sampled = sample_negatives(instance.target_items, self.split.item_count, self.negative_rng)
            positives.append(self.model.rate(trace, instance.target_items))
            negatives.append(self.model.rate(trace, sampled))
        return bpr_batch_loss(positives, negatives, self.params.tensors(), self.config.lambda_reg)

    def _check_finite(self, loss_value: float, epoch: int, batch_index: int):
        if math.isfinite(loss_value) and self.params.all_finite():
            return
        current_tape().clear()
        norms = self.params.norms()
        largest = sorted(norms.items(), key=lambda kv: -(kv[1] if math.isfinite(kv[1]) else math.inf))[:5]
        summary = ', '.join(f"{name}={value:.4g}" for name, value in largest)
        raise DivergenceError(f"non-finite loss {loss_value} at epoch {epoch}, batch {batch_index}; "
                              f"largest parameter norms: {summary}")

    def run_epoch(self, epoch: int) -> float:
        """One pass over the shuffled training instances; returns the summed loss."""
        train = self.split.train
        order = self.shuffle_rng.permutation(len(train))
        batch_size = self.config.batch_size
        batch_count = math.ceil(len(train) / batch_size)
        total = 0.0

        batches = tqdm(range(batch_count), desc=f"Epoch {epoch}", disable=not self.show_progress, leave=False)
        for batch_index in batches:
            batch = [train[i] for i in order[batch_index * batch_size:(batch_index + 1) * batch_size]]
            self.optimizer.zero_grad()
            loss = self.batch_loss(batch)
            loss_value = loss.item()
            self._check_finite(loss_value, epoch, batch_index)
            backward(loss)
            self.optimizer.step()
            total += loss_value
        return total

    def validate(self):
        """Validation (hit, map) at ``validation_k``; None when there is no validation data."""
        if not self.split.validation:
            return None, None
        k = self.config.validation_k
        report = evaluate(self.model, self.split.validation, ks=[k], label='validation', show_progress=False)
        return report.value('hit', k), report.value('map', k)

    def _checkpoint(self, params: ParameterSet, epoch: int, metric: Optional[float]) -> Checkpoint:
        metadata = {
            'epoch': epoch,
            'seed': self.config.seed,
            'train': self.config.model_dump(),
            'validation_metric': metric,
        }
        return Checkpoint(self.model_config, params, self.split.user_count, self.split.item_count, metadata)

    def train(self) -> TrainResult:
        """
        Run the optimization loop.

        Returns:
            TrainResult whose checkpoint holds the best-validation parameters
            (the initial parameters when ``epochs`` is 0)

        Raises:
            DivergenceError: If a batch loss or a parameter becomes non-finite
        """
        config = self.config
        logger.info(f"Training variant {self.model_config.variant.value}: {len(self.split.train)} instances, "
                    f"{self.params.count()} parameters, {config.epochs} epochs, batch {config.batch_size}")

        best_state = self.params.state()
        best_epoch, best_metric, stale = 0, None, 0
        history: List[EpochRecord] = []

        epochs = tqdm(range(1, config.epochs + 1), desc="Training", disable=not self.show_progress)
        for epoch in epochs:
            started = time.perf_counter()
            train_loss = self.run_epoch(epoch)
            val_hit, val_map = self.validate()
            metric = val_hit if val_hit is not None else -train_loss

            record = EpochRecord(epoch, train_loss, val_hit, val_map, math.sqrt(self.params.squared_norm()),
                                 time.perf_counter() - started, config.validation_k)
            history.append(record)
            if self.epoch_callback:
                self.epoch_callback(record.to_dict())
            logger.info(f"Epoch {epoch}: loss={train_loss:.6f}, "
                        f"val_hit@{config.validation_k}={val_hit if val_hit is None else round(val_hit, 6)}, "
                        f"param_norm={record.param_norm:.4f}")

            if best_metric is None or metric > best_metric:
                best_state, best_epoch, best_metric, stale = self.params.state(), epoch, metric, 0
            else:
                stale += 1
                if stale >= config.early_stop_patience:
                    logger.info(f"Early stopping after epoch {epoch}: no improvement for {stale} epochs")
                    break

        best_params = self.params.copy()
        best_params.load_state(best_state)
        logger.info(f"Best epoch {best_epoch} with validation metric {best_metric}")
        return TrainResult(self._checkpoint(best_params, best_epoch, best_metric), history, best_epoch, best_metric)


def train(split: DatasetSplit, model_config: ModelConfig, train_config: TrainConfig, **kwargs) -> TrainResult:
    """Train one model (see ``Trainer``)."""
    return Trainer(model_config, train_config, split, **kwargs).train()
