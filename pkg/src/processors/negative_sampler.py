"""Uniform negative sampling for pairwise ranking."""
from typing import Iterable, List

import numpy as np

from src.errors import ContractError


def sample_negatives(target_items: Iterable[int], item_count: int, rng: np.random.Generator) -> List[int]:
    """
    Draw one unobserved item per positive, uniformly and with replacement.

    Args:
        target_items: Ground-truth item set of the instance
        item_count: M, the number of items
        rng: Seeded generator; identical seeds give identical samples

    Returns:
        List with one negative item per distinct positive

    Raises:
        ContractError: If every item is a positive
    """
    positives = np.unique(np.fromiter(target_items, dtype=np.int64))
    if item_count <= positives.size:
        raise ContractError(f"cannot sample negatives: {positives.size} positives among {item_count} items")

    candidates = np.setdiff1d(np.arange(item_count, dtype=np.int64), positives, assume_unique=True)
    return rng.choice(candidates, size=positives.size, replace=True).tolist()


def user_rng(seed: int, user_id: int) -> np.random.Generator:
    """Per-user generator seeded with ``seed XOR user_id``."""
    return np.random.default_rng(int(seed) ^ int(user_id))
