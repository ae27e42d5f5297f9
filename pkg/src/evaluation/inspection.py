"""Session-attention and time-gate exports for a single instance."""
from pathlib import Path
from typing import Dict, Optional, Sequence

import numpy as np
import pandas as pd

from src.autograd import no_grad
from src.domain import DatasetSplit, TrainingInstance
from src.errors import ConfigError, SelectorError
from src.exporters.csv_writer import CSVWriter
from src.recommender.network import TLSRecModel
from src.utils.logger import logger


def select_instance(split: DatasetSplit, portion: str = 'test', user: Optional[str] = None,
                    index: int = 0) -> TrainingInstance:
    """
    Pick one instance of a split.

    Args:
        split: Loaded instances
        portion: 'train', 'validation' or 'test'
        user: Raw user id, or a dense index written as a number
        index: Position among the matching instances

    Raises:
        SelectorError: If nothing matches
    """
    try:
        candidates = split.portion(portion)
    except KeyError as e:
        raise SelectorError(str(e)) from None

    if user is not None:
        dense = split.id_mapping.user_index(str(user))
        if dense < 0 and str(user).isdigit():
            dense = int(user)
        candidates = [inst for inst in candidates if inst.user_id == dense]

    if not 0 <= index < len(candidates):
        who = f" of user {user}" if user is not None else ""
        raise SelectorError(f"no {portion} instance{who} at index {index} ({len(candidates)} available)")
    return candidates[index]


def user_label(split: DatasetSplit, user_id: int) -> str:
    """Raw id of a dense user index when known, for file names."""
    ids = split.id_mapping.user_ids
    raw = ids[user_id] if 0 <= user_id < len(ids) else str(user_id)
    return ''.join(ch if ch.isalnum() or ch in '-_' else '_' for ch in raw)


def export_inspection(model: TLSRecModel, instance: TrainingInstance, output_dir: Path,
                      deltas: Optional[Sequence[int]] = None, label: Optional[str] = None) -> Dict[str, Path]:
    """
    Write the session attention of every block and the gate sweep of one instance.

    Attention files hold the head-averaged T×T weights (zero above the
    diagonal). The gate file has one row per lag with the d gate values and
    their mean. Attention-fused variants add the head-averaged 2×2 weights
    between the long- and short-term embeddings. Variants without blocks or
    without a gate skip those files.

    Args:
        model: Model in evaluation mode
        instance: Padded instance
        output_dir: Destination directory
        deltas: Lags to sweep (defaults to 1..C)
        label: User label for file names (defaults to the dense user id)

    Returns:
        Mapping from export name to file path

    Raises:
        ConfigError: If ``deltas`` is given but empty for a gated variant
    """
    writer = CSVWriter(Path(output_dir))
    label = label or str(instance.user_id)
    outputs: Dict[str, Path] = {}

    with no_grad():
        trace = model.forward(instance, training=False)
    for block in range(len(trace.block_attention)):
        name = f"attention_user{label}_block{block}"
        outputs[name] = writer.write_attention(trace.session_attention(block), f"{name}.csv")

    long_weights = trace.long_weights.numpy()
    outputs['long_weights'] = writer.write_frame(
        _long_weight_frame(long_weights), f"long_weights_user{label}.csv")

    if trace.fusion_attention:
        outputs['fusion_attention'] = writer.write_preference_attention(
            trace.preference_attention(), f"fusion_attention_user{label}.csv")

    if model.config.variant.uses_gate:
        deltas = list(range(1, model.config.C + 1)) if deltas is None else list(deltas)
        if not deltas:
            raise ConfigError("inspection needs at least one lag to sweep")
        gates = model.gate_sweep(instance, deltas)
        name = f"gates_user{label}_delta{deltas[0]}-{deltas[-1]}"
        outputs['gates'] = writer.write_gates(gates, deltas, f"{name}.csv")
    else:
        logger.info(f"Variant {model.config.variant.value} has no time gate; skipping the gate sweep")

    logger.info(f"Exported {len(outputs)} inspection files for user {label}")
    return outputs


def _long_weight_frame(weights: np.ndarray) -> pd.DataFrame:
    return pd.DataFrame({'session': np.arange(1, weights.size + 1), 'weight': weights})
