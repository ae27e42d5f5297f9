"""Top-k ranking metrics."""
from typing import Collection, Sequence

import numpy as np

from src.errors import ContractError


def _hit_positions(ground_truth: Collection[int], ranking: Sequence[int], k: int) -> np.ndarray:
    """1-based ranks of the relevant items among the first k of ``ranking``."""
    if len(ground_truth) == 0:
        raise ContractError("ground truth set is empty")
    if k < 1:
        raise ContractError(f"k must be positive, got {k}")
    top = np.asarray(ranking[:k], dtype=np.int64)
    relevant = np.fromiter(set(ground_truth), dtype=np.int64)
    return np.nonzero(np.isin(top, relevant))[0] + 1


def hit_at_k(ground_truth: Collection[int], top_k: Sequence[int]) -> int:
    """
    1 when any relevant item appears in ``top_k``, else 0.

    Raises:
        ContractError: If the ground truth is empty
    """
    if len(ground_truth) == 0:
        raise ContractError("ground truth set is empty")
    if len(top_k) == 0:
        return 0
    return int(_hit_positions(ground_truth, top_k, len(top_k)).size > 0)


def map_at_k(ground_truth: Collection[int], ranking: Sequence[int], k: int) -> float:
    """
    Precision-weighted hit sum over the top k.

    Every relevant item at rank r within the top k adds (number of relevant
    items ranked at or above it) / r. The sum is not divided by |S_u|; see
    ``average_precision_at_k`` for the normalized form.

    Args:
        ground_truth: Relevant items S_u
        ranking: Full ranking, best item first
        k: Cut-off
    """
    positions = _hit_positions(ground_truth, ranking, k)
    return float(np.sum(np.arange(1, positions.size + 1) / positions))


def average_precision_at_k(ground_truth: Collection[int], ranking: Sequence[int], k: int) -> float:
    """Standard AP@k: ``map_at_k`` divided by min(|S_u|, k)."""
    return map_at_k(ground_truth, ranking, k) / min(len(set(ground_truth)), k)
