"""Reader for raw delimiter-separated interaction logs."""
import io
import re
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import BinaryIO, Dict, List, Optional, Tuple, Union

import pandas as pd

from src.domain import IdMapping, Interaction
from src.errors import InputFileError, InteractionParseError
from src.utils.logger import logger


REQUIRED_COLUMNS = ('user', 'item', 'timestamp')
IGNORED_COLUMN = 'ignore'


@dataclass(frozen=True)
class FormatDescriptor:
    """
    Layout of a raw interaction log.

    ``columns`` names every field of a record in file order; it must contain
    user, item and timestamp once each and may mark extra fields as ``ignore``
    (e.g. the rating column of MovieLens ``user::item::rating::timestamp``).
    ``timestamp_format`` is a strptime pattern; None means integer seconds.
    """
    delimiter: str = ','
    columns: Tuple[str, ...] = REQUIRED_COLUMNS
    has_header: bool = False
    timestamp_format: Optional[str] = None
    encoding: str = 'utf-8'

    def __post_init__(self):
        for name in REQUIRED_COLUMNS:
            if self.columns.count(name) != 1:
                raise ValueError(f"format columns must contain {name!r} exactly once: {self.columns}")
        unknown = set(self.columns) - set(REQUIRED_COLUMNS) - {IGNORED_COLUMN}
        if unknown:
            raise ValueError(f"unknown format columns {sorted(unknown)}")


class InteractionReader:
    """Parse interaction logs into densely re-indexed Interaction records."""

    def __init__(self, descriptor: FormatDescriptor = None):
        """
        Initialize interaction reader.

        Args:
            descriptor: Record layout (defaults to ``user,item,timestamp``)
        """
        self.descriptor = descriptor or FormatDescriptor()

    def read_file(self, filepath: Union[str, Path]) -> Tuple[List[Interaction], IdMapping]:
        """
        Read a log file from disk.

        Raises:
            InputFileError: If the file does not exist or cannot be read
        """
        filepath = Path(filepath)
        if not filepath.is_file():
            raise InputFileError(f"interaction log not found: {filepath}")

        logger.info(f"Reading interactions from {filepath}")
        try:
            with open(filepath, 'rb') as f:
                return self.parse(f)
        except OSError as e:
            raise InputFileError(f"cannot read interaction log {filepath}: {e}") from e

    def parse(self, source: BinaryIO) -> Tuple[List[Interaction], IdMapping]:
        """
        Parse a byte stream.

        Args:
            source: Binary stream with one record per line

        Returns:
            Tuple of (interactions in file order, id mapping)

        Raises:
            InteractionParseError: On a malformed row, with its line number
        """
        frame = self._read_frame(source.read())
        mapping = IdMapping()
        if frame is None:
            logger.info("Empty interaction log")
            return [], mapping

        positions = {name: self.descriptor.columns.index(name) for name in REQUIRED_COLUMNS}
        first_line = 2 if self.descriptor.has_header else 1
        user_index: Dict[str, int] = {}
        item_index: Dict[str, int] = {}
        interactions = []

        for row_number, row in enumerate(frame.itertuples(index=False, name=None)):
            line_number = first_line + row_number
            fields = ['' if pd.isna(value) else str(value).strip() for value in row]

            if not any(fields):
                continue
            if any(f == '' for f in fields):
                raise InteractionParseError(
                    f"expected {len(self.descriptor.columns)} fields, found {sum(1 for f in fields if f)}",
                    line_number
                )

            user_raw = fields[positions['user']]
            item_raw = fields[positions['item']]
            timestamp = self._parse_timestamp(fields[positions['timestamp']], line_number)

            if user_raw not in user_index:
                user_index[user_raw] = len(mapping.user_ids)
                mapping.user_ids.append(user_raw)
            if item_raw not in item_index:
                item_index[item_raw] = len(mapping.item_ids)
                mapping.item_ids.append(item_raw)

            interactions.append(Interaction(user_index[user_raw], item_index[item_raw], timestamp))

        logger.info(f"Parsed {len(interactions)} interactions: "
                    f"{mapping.user_count} users, {mapping.item_count} items")
        return interactions, mapping

    def _read_frame(self, data: bytes) -> Optional[pd.DataFrame]:
        """Load raw records as strings, mapping tokenizer errors to line numbers."""
        if not data.strip():
            return None

        delimiter = self.descriptor.delimiter
        try:
            frame = pd.read_csv(
                io.BytesIO(data),
                sep=delimiter,
                header=None,
                skiprows=1 if self.descriptor.has_header else 0,
                dtype=str,
                keep_default_na=False,
                skip_blank_lines=False,
                encoding=self.descriptor.encoding,
                engine='python' if len(delimiter) > 1 else 'c',
            )
        except pd.errors.EmptyDataError:
            return None
        except pd.errors.ParserError as e:
            match = re.search(r'line (\d+)', str(e))
            line_number = int(match.group(1)) if match else 0
            raise InteractionParseError(f"wrong number of fields ({e})", line_number) from e

        expected = len(self.descriptor.columns)
        if frame.shape[1] != expected:
            first_line = 2 if self.descriptor.has_header else 1
            raise InteractionParseError(
                f"expected {expected} fields, found {frame.shape[1]}", first_line
            )
        return frame

    def _parse_timestamp(self, value: str, line_number: int) -> int:
        """Convert a timestamp field to integer seconds since the epoch."""
        try:
            if self.descriptor.timestamp_format is None:
                return int(value)
            moment = datetime.strptime(value, self.descriptor.timestamp_format)
            if moment.tzinfo is None:
                moment = moment.replace(tzinfo=timezone.utc)
            return int(moment.timestamp())
        except ValueError as e:
            raise InteractionParseError(f"invalid timestamp {value!r}", line_number) from e


def parse_interactions(source: BinaryIO, descriptor: FormatDescriptor = None
                       ) -> Tuple[List[Interaction], IdMapping]:
    """Parse a byte stream of interaction records (see ``InteractionReader.parse``)."""
    return InteractionReader(descriptor).parse(source)
