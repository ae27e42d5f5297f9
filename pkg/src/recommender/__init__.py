"""TLSRec network, parameters, variants and checkpoints."""
from src.recommender.config import ModelConfig, Variant, parse_variant
from src.recommender.parameters import ParameterSet, parameter_count, parameter_shapes
from src.recommender.network import ForwardTrace, TLSRecModel
from src.recommender.checkpoint import Checkpoint, load_checkpoint, save_checkpoint

__all__ = [
    'Checkpoint',
    'ForwardTrace',
    'ModelConfig',
    'ParameterSet',
    'TLSRecModel',
    'Variant',
    'load_checkpoint',
    'parameter_count',
    'parameter_shapes',
    'parse_variant',
    'save_checkpoint',
]
