"""JSON and JSON Lines reports for ingestion, training and evaluation."""
import json
from pathlib import Path
from typing import Dict, Iterable, Union

from src.config.settings import Settings
from src.utils.logger import logger


def _dumps(record: Dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(',', ':'), ensure_ascii=False)


def write_json(data: Dict, filepath: Union[str, Path]) -> Path:
    """Write an indented JSON document with sorted keys."""
    filepath = Path(filepath)
    filepath.parent.mkdir(parents=True, exist_ok=True)
    with open(filepath, 'w', encoding=Settings.OUTPUT_ENCODING, newline='\n') as f:
        json.dump(data, f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write('\n')
    logger.info(f"Wrote {filepath}")
    return filepath


def write_jsonl(records: Iterable[Dict], filepath: Union[str, Path]) -> Path:
    """Write one compact JSON record per line."""
    filepath = Path(filepath)
    filepath.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(filepath, 'w', encoding=Settings.OUTPUT_ENCODING, newline='\n') as f:
        for record in records:
            f.write(_dumps(record) + '\n')
            count += 1
    logger.info(f"Wrote {count} records to {filepath}")
    return filepath


class JsonlAppender:
    """Line-delimited log written one record at a time (epoch logs)."""

    def __init__(self, filepath: Union[str, Path]):
        """
        Initialize appender; truncates an existing file.

        Args:
            filepath: Destination path
        """
        self.filepath = Path(filepath)
        self.filepath.parent.mkdir(parents=True, exist_ok=True)
        self.filepath.write_text('', encoding=Settings.OUTPUT_ENCODING)

    def __call__(self, record: Dict):
        with open(self.filepath, 'a', encoding=Settings.OUTPUT_ENCODING, newline='\n') as f:
            f.write(_dumps(record) + '\n')


def write_ranking_report(report, directory: Union[str, Path], name: str) -> Dict[str, Path]:
    """
    Write a RankingReport as ``<name>.jsonl`` records and a ``<name>.txt`` table.

    Returns:
        Mapping with 'records' and 'table' paths
    """
    directory = Path(directory)
    records = write_jsonl(report.to_records(), directory / f"{name}.jsonl")
    table = directory / f"{name}.txt"
    table.write_text(report.table() + '\n', encoding=Settings.OUTPUT_ENCODING)
    return {'records': records, 'table': table}
