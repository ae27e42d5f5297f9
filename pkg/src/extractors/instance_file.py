"""Read JSON Lines instance files back into a DatasetSplit."""
import json
from pathlib import Path
from typing import Dict, Union

from src.config.settings import Settings
from src.domain import DatasetSplit, IdMapping, Session, TrainingInstance
from src.errors import InputFileError, InstanceFileError
from src.exporters.instance_file import INSTANCE_FORMAT_VERSION
from src.utils.logger import logger


HEADER_KEYS = (
    'user_count', 'item_count', 'sessions_per_instance', 'max_session_length',
    'max_delta', 'threshold_seconds', 'seed', 'ratios',
)


def _parse_instance(record: Dict) -> TrainingInstance:
    sessions = tuple(
        Session(tuple(int(i) for i in items), int(times[0]), int(times[1]))
        for items, times in zip(record['sessions'], record['session_times'])
    )
    return TrainingInstance(
        user_id=int(record['user']),
        input_sessions=sessions,
        target_items=tuple(int(i) for i in record['targets']),
        time_lag_seconds=int(record['lag']),
        delta_index=int(record['delta']),
        target_start_ts=int(record.get('target_start', 0)),
    )


def read_instance_file(filepath: Union[str, Path]) -> DatasetSplit:
    """
    Load a split written by ``write_instance_file``.

    Args:
        filepath: Path of the instance file

    Returns:
        DatasetSplit with the header's metadata

    Raises:
        InputFileError: If the file does not exist
        InstanceFileError: If the file is malformed or of another format version
    """
    filepath = Path(filepath)
    if not filepath.is_file():
        raise InputFileError(f"instance file not found: {filepath}")

    portions = {'train': [], 'validation': [], 'test': []}
    with open(filepath, 'r', encoding=Settings.OUTPUT_ENCODING) as f:
        try:
            header = json.loads(f.readline())
        except ValueError as e:
            raise InstanceFileError(f"{filepath}: unreadable instance header ({e})") from e

        if not isinstance(header, dict) or header.get('format') != 'tlsrec-instances':
            raise InstanceFileError(f"{filepath}: not a TLSRec instance file")
        if header.get('format_version') != INSTANCE_FORMAT_VERSION:
            raise InstanceFileError(f"{filepath}: unsupported instance format version "
                                    f"{header.get('format_version')} (expected {INSTANCE_FORMAT_VERSION})")
        missing = [key for key in HEADER_KEYS if key not in header]
        if missing:
            raise InstanceFileError(f"{filepath}: header is missing {', '.join(missing)}")

        for line_number, line in enumerate(f, start=2):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                portions[record['split']].append(_parse_instance(record))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError, IndexError) as e:
                raise InstanceFileError(f"{filepath}: malformed instance on line {line_number} ({e})") from e

    split = DatasetSplit(
        train=portions['train'],
        validation=portions['validation'],
        test=portions['test'],
        item_count=int(header['item_count']),
        user_count=int(header['user_count']),
        max_session_length=int(header['max_session_length']),
        sessions_per_instance=int(header['sessions_per_instance']),
        max_delta=int(header['max_delta']),
        threshold_seconds=int(header['threshold_seconds']),
        seed=int(header['seed']),
        ratios=tuple(float(r) for r in header['ratios']),
        id_mapping=IdMapping(list(header.get('user_ids', [])), list(header.get('item_ids', []))),
    )
    logger.info(f"Loaded {len(split.all_instances())} instances from {filepath} "
                f"(N={split.user_count}, M={split.item_count}, T={split.sessions_per_instance}, "
                f"m={split.max_session_length}, C={split.max_delta})")
    return split
