"""Optimization settings."""
from pydantic import BaseModel, ConfigDict, Field


class TrainConfig(BaseModel):
    """
    BPR training and Adam settings.

    ``validation_k`` is the cut-off of the validation Hit@k used for early
    stopping and best-checkpoint selection.
    """
    model_config = ConfigDict(frozen=True, extra='forbid')

    learning_rate: float = Field(0.001, gt=0.0)
    batch_size: int = Field(128, ge=1)
    epochs: int = Field(50, ge=0)
    lambda_reg: float = Field(1e-5, ge=0.0)
    adam_beta1: float = Field(0.9, ge=0.0, lt=1.0)
    adam_beta2: float = Field(0.999, ge=0.0, lt=1.0)
    adam_epsilon: float = Field(1e-8, gt=0.0)
    seed: int = 0
    early_stop_patience: int = Field(5, ge=1)
    validation_k: int = Field(20, ge=1)
