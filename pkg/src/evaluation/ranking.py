"""Full-catalogue item ranking."""
from typing import Collection, Optional

import numpy as np

from src.autograd import Tensor, no_grad
from src.recommender import layers


def rank_scores(scores: np.ndarray, exclude: Optional[Collection[int]] = None) -> np.ndarray:
    """
    Order items by descending score.

    Ties go to the smaller item id; excluded items are moved to the end
    (keeping the same order among themselves).

    Args:
        scores: One score per item
        exclude: Items to place last

    Returns:
        Permutation of range(M), best item first
    """
    scores = np.asarray(scores, dtype=np.float64)
    item_ids = np.arange(scores.size)
    excluded = np.zeros(scores.size, dtype=bool)
    if exclude:
        excluded[np.fromiter(exclude, dtype=np.int64)] = True
    return np.lexsort((item_ids, -scores, excluded))


def rank_items(user_embedding: Tensor, item_embeddings: Tensor,
               exclude: Optional[Collection[int]] = None) -> np.ndarray:
    """Rank all items for a fused user embedding (see ``rank_scores``)."""
    with no_grad():
        scores = layers.score_all_items(user_embedding, item_embeddings).numpy()
    return rank_scores(scores, exclude)
