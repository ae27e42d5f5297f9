"""CSV export for inspection matrices and ablation tables."""
from pathlib import Path
from typing import Dict, List, Sequence

import numpy as np
import pandas as pd

from src.config.settings import Settings
from src.utils.logger import logger


class CSVWriter:
    """
    Write plot-ready CSV files with full float64 precision.

    Generates:
    - attention_<user>_block<b>.csv: T×T session attention (query rows)
    - gates_<user>_delta<first>-<last>.csv: one gate vector per lag plus its mean
    - ablation.csv: variants × metrics × k
    """

    def __init__(self, output_dir: Path = None):
        """
        Initialize CSV writer.

        Args:
            output_dir: Directory for output files (defaults to Settings.DEFAULT_OUTPUT_DIR)
        """
        self.output_dir = Path(output_dir or Settings.DEFAULT_OUTPUT_DIR)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.encoding = Settings.OUTPUT_ENCODING
        self.float_format = Settings.CSV_FLOAT_FORMAT

    def write_frame(self, frame: pd.DataFrame, filename: str, index: bool = False) -> Path:
        """Write a DataFrame with the configured float format and LF line endings."""
        output_file = self.output_dir / filename
        frame.to_csv(output_file, index=index, float_format=self.float_format,
                     encoding=self.encoding, lineterminator='\n')
        logger.info(f"Wrote {len(frame)} rows to {output_file}")
        return output_file

    def write_attention(self, weights: np.ndarray, filename: str) -> Path:
        """
        Write a T×T attention matrix.

        Schema:
        - query: 1-based session position of the attending session
        - key_1 .. key_T: weight given to each session position
        """
        T = weights.shape[0]
        frame = pd.DataFrame(weights, columns=[f"key_{j}" for j in range(1, weights.shape[1] + 1)])
        frame.insert(0, 'query', np.arange(1, T + 1))
        return self.write_frame(frame, filename)

    def write_preference_attention(self, weights: np.ndarray, filename: str) -> Path:
        """
        Write the 2×2 attention between the long- and short-term embeddings.

        Schema:
        - query: 'long' or 'short'
        - long, short: weight given to each embedding
        """
        frame = pd.DataFrame(weights, columns=['long', 'short'])
        frame.insert(0, 'query', ['long', 'short'])
        return self.write_frame(frame, filename)

    def write_gates(self, gates: np.ndarray, deltas: Sequence[int], filename: str) -> Path:
        """
        Write one gate vector per lag.

        Schema:
        - delta: discretized lag
        - g_1 .. g_d: gate value per dimension
        - mean: average over the d dimensions
        """
        frame = pd.DataFrame(gates, columns=[f"g_{k}" for k in range(1, gates.shape[1] + 1)])
        frame.insert(0, 'delta', np.asarray(list(deltas), dtype=np.int64))
        frame['mean'] = gates.mean(axis=1) if gates.size else np.zeros(len(frame))
        return self.write_frame(frame, filename)

    def write_ablation_table(self, rows: List[Dict], filename: str = "ablation.csv") -> Path:
        """
        Write the variant comparison table.

        Args:
            rows: One dict per variant with 'variant', 'label' and metric columns
        """
        frame = pd.DataFrame(rows)
        leading = [c for c in ('variant', 'label', 'runs') if c in frame.columns]
        frame = frame[leading + [c for c in frame.columns if c not in leading]]
        return self.write_frame(frame, filename)
