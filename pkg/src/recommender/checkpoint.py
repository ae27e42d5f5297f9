"""
Binary checkpoint format.

Layout: the 8-byte magic ``TLSRECCK``, a 4-byte little-endian header length,
a UTF-8 JSON header (sorted keys) and then every parameter as little-endian
float64 in header order. Nothing time-dependent is stored, so saving the same
parameters twice gives the same bytes.
"""
import json
import struct
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np
from pydantic import ValidationError

from src.errors import CheckpointError, ContractError
from src.recommender.config import ModelConfig
from src.recommender.network import TLSRecModel
from src.recommender.parameters import ParameterSet, parameter_shapes
from src.utils.logger import logger


MAGIC = b'TLSRECCK'
CHECKPOINT_FORMAT_VERSION = 1
_LENGTH = struct.Struct('<I')


@dataclass
class Checkpoint:
    """A model configuration with its parameters and dataset shape."""
    config: ModelConfig
    params: ParameterSet
    user_count: int
    item_count: int
    metadata: Dict[str, Any] = field(default_factory=dict)

    def model(self) -> TLSRecModel:
        return TLSRecModel(self.config, self.params)


def checkpoint_bytes(checkpoint: Checkpoint) -> bytes:
    """Serialize a checkpoint."""
    expected = parameter_shapes(checkpoint.config, checkpoint.user_count, checkpoint.item_count)
    actual = OrderedDict((name, tuple(shape)) for name, shape in checkpoint.params.shapes().items())
    if list(expected.items()) != list(actual.items()):
        raise ContractError("parameter set does not match the checkpoint configuration")

    header = {
        'format': 'tlsrec-checkpoint',
        'format_version': CHECKPOINT_FORMAT_VERSION,
        'config': checkpoint.config.header_dict(),
        'user_count': checkpoint.user_count,
        'item_count': checkpoint.item_count,
        'parameters': [[name, list(shape)] for name, shape in actual.items()],
        'metadata': checkpoint.metadata,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(',', ':')).encode('utf-8')

    chunks = [MAGIC, _LENGTH.pack(len(header_bytes)), header_bytes]
    for _, tensor in checkpoint.params.items():
        chunks.append(np.ascontiguousarray(tensor.values, dtype='<f8').tobytes())
    return b''.join(chunks)


def parse_checkpoint(data: bytes, source: str = '<bytes>') -> Checkpoint:
    """
    Deserialize checkpoint bytes.

    Raises:
        CheckpointError: On a bad magic, version, header or payload size
    """
    prefix = len(MAGIC) + _LENGTH.size
    if len(data) < prefix or data[:len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{source}: not a TLSRec checkpoint")

    (header_length,) = _LENGTH.unpack_from(data, len(MAGIC))
    try:
        header = json.loads(data[prefix:prefix + header_length].decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{source}: unreadable checkpoint header ({e})") from e

    if header.get('format_version') != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(f"{source}: unsupported checkpoint version {header.get('format_version')} "
                              f"(expected {CHECKPOINT_FORMAT_VERSION})")
    try:
        config = ModelConfig(**header['config'])
        user_count, item_count = int(header['user_count']), int(header['item_count'])
        entries = [(name, tuple(int(s) for s in shape)) for name, shape in header['parameters']]
    except (KeyError, TypeError, ValueError, ValidationError) as e:
        raise CheckpointError(f"{source}: invalid checkpoint header ({e})") from e

    offset = prefix + header_length
    arrays = OrderedDict()
    for name, shape in entries:
        size = int(np.prod(shape, dtype=np.int64)) * 8
        if offset + size > len(data):
            raise CheckpointError(f"{source}: truncated payload at parameter {name}")
        arrays[name] = np.frombuffer(data, dtype='<f8', count=size // 8, offset=offset).reshape(shape).astype(np.float64)
        offset += size
    if offset != len(data):
        raise CheckpointError(f"{source}: {len(data) - offset} trailing bytes after the parameters")

    if list(parameter_shapes(config, user_count, item_count).items()) != entries:
        raise CheckpointError(f"{source}: parameter list does not match the stored configuration")

    return Checkpoint(config, ParameterSet.from_arrays(arrays), user_count, item_count, header.get('metadata', {}))


def save_checkpoint(checkpoint: Checkpoint, filepath: Union[str, Path]) -> Path:
    """Write a checkpoint file, creating parent directories."""
    filepath = Path(filepath)
    filepath.parent.mkdir(parents=True, exist_ok=True)
    filepath.write_bytes(checkpoint_bytes(checkpoint))
    logger.info(f"Saved checkpoint ({checkpoint.params.count()} parameters, "
                f"variant {checkpoint.config.variant.value}) to {filepath}")
    return filepath


def load_checkpoint(filepath: Union[str, Path]) -> Checkpoint:
    """
    Read a checkpoint file.

    Raises:
        CheckpointError: If the file is missing or malformed
    """
    filepath = Path(filepath)
    if not filepath.is_file():
        raise CheckpointError(f"checkpoint not found: {filepath}")
    try:
        data = filepath.read_bytes()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint {filepath}: {e}") from e
    checkpoint = parse_checkpoint(data, str(filepath))
    logger.info(f"Loaded checkpoint {filepath} (variant {checkpoint.config.variant.value})")
    return checkpoint
