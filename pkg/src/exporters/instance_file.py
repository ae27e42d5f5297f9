"""Write padded dataset splits as a self-describing JSON Lines instance file."""
import json
from pathlib import Path
from typing import Dict, Union

from src.config.settings import Settings
from src.domain import DatasetSplit, TrainingInstance
from src.utils.logger import logger


INSTANCE_FORMAT_VERSION = 1


def _dumps(record: Dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(',', ':'), ensure_ascii=False)


def instance_header(split: DatasetSplit, include_ids: bool = True) -> Dict:
    """
    Header record describing a split.

    Args:
        split: Padded dataset split
        include_ids: Whether to embed the raw user/item id tables

    Returns:
        Header dictionary (format version, N, M, T, m, C, threshold, seed, ratios)
    """
    header = {
        'format': 'tlsrec-instances',
        'format_version': INSTANCE_FORMAT_VERSION,
        'user_count': split.user_count,
        'item_count': split.item_count,
        'sessions_per_instance': split.sessions_per_instance,
        'max_session_length': split.max_session_length,
        'max_delta': split.max_delta,
        'threshold_seconds': split.threshold_seconds,
        'seed': split.seed,
        'ratios': list(split.ratios),
        'instance_counts': {name: len(split.portion(name)) for name in split.PORTIONS},
    }
    if include_ids:
        header['user_ids'] = list(split.id_mapping.user_ids)
        header['item_ids'] = list(split.id_mapping.item_ids)
    return header


def instance_record(instance: TrainingInstance, portion: str) -> Dict:
    """One instance as a JSON-ready dictionary."""
    return {
        'split': portion,
        'user': instance.user_id,
        'sessions': [list(s.item_ids) for s in instance.input_sessions],
        'session_times': [[s.start_ts, s.end_ts] for s in instance.input_sessions],
        'targets': list(instance.target_items),
        'lag': instance.time_lag_seconds,
        'delta': instance.delta_index,
        'target_start': instance.target_start_ts,
    }


class InstanceFileWriter:
    """Serialize a DatasetSplit; identical splits always give identical bytes."""

    def __init__(self, encoding: str = None):
        """
        Initialize instance file writer.

        Args:
            encoding: Output encoding (defaults to Settings.OUTPUT_ENCODING)
        """
        self.encoding = encoding or Settings.OUTPUT_ENCODING

    def write(self, split: DatasetSplit, filepath: Union[str, Path]) -> Path:
        """
        Write the header line followed by one line per instance.

        Instances are written train, then validation, then test, each in
        split order.

        Args:
            split: Padded dataset split
            filepath: Destination path

        Returns:
            Path to the written file
        """
        filepath = Path(filepath)
        filepath.parent.mkdir(parents=True, exist_ok=True)

        with open(filepath, 'w', encoding=self.encoding, newline='\n') as f:
            f.write(_dumps(instance_header(split)) + '\n')
            for portion in split.PORTIONS:
                for instance in split.portion(portion):
                    f.write(_dumps(instance_record(instance, portion)) + '\n')

        logger.info(f"Wrote {len(split.all_instances())} instances to {filepath}")
        return filepath

    def write_header_echo(self, split: DatasetSplit, filepath: Union[str, Path]) -> Path:
        """Write the header without id tables as indented JSON for inspection."""
        filepath = Path(filepath)
        filepath.parent.mkdir(parents=True, exist_ok=True)
        with open(filepath, 'w', encoding=self.encoding, newline='\n') as f:
            json.dump(instance_header(split, include_ids=False), f, indent=2, sort_keys=True)
            f.write('\n')
        return filepath


def write_instance_file(split: DatasetSplit, filepath: Union[str, Path]) -> Path:
    """Write ``split`` to ``filepath`` (see ``InstanceFileWriter``)."""
    return InstanceFileWriter().write(split, filepath)
