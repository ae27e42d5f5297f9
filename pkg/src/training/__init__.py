"""BPR training with Adam."""
from src.training.config import TrainConfig
from src.training.loss import bpr_batch_loss, l2_penalty
from src.training.optimizer import Adam, OptimizerState, adam_step
from src.training.trainer import EpochRecord, Trainer, TrainResult, train

__all__ = [
    'Adam',
    'EpochRecord',
    'OptimizerState',
    'TrainConfig',
    'TrainResult',
    'Trainer',
    'adam_step',
    'bpr_batch_loss',
    'l2_penalty',
    'train',
]
