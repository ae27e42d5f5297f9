"""Bayesian personalized ranking loss with L2 regularization."""
from typing import Sequence, Union

from src.autograd import Tensor
from src.autograd import ops
from src.errors import ContractError


Ratings = Union[Tensor, Sequence[Tensor]]


def _flatten(ratings: Ratings) -> Tensor:
    if isinstance(ratings, Tensor):
        return ops.reshape(ratings, (ratings.size,))
    parts = [ops.reshape(r, (r.size,)) for r in ratings]
    if not parts:
        return Tensor([])
    return parts[0] if len(parts) == 1 else ops.concat(parts, axis=0)


def l2_penalty(parameters: Sequence[Tensor]) -> Tensor:
    """Sum of squares of every parameter entry."""
    terms = [ops.sum(ops.mul(p, p)) for p in parameters]
    total = terms[0]
    for term in terms[1:]:
        total = ops.add(total, term)
    return total


def bpr_batch_loss(positive_ratings: Ratings, negative_ratings: Ratings,
                   parameters: Sequence[Tensor] = (), lambda_reg: float = 0.0) -> Tensor:
    """
    −Σ log σ(r⁺ − r⁻) + λ Σ‖θ‖² over paired ratings, summed (not averaged).

    Args:
        positive_ratings: Ratings of observed items (a vector or a list of vectors)
        negative_ratings: Ratings of the paired sampled items, same layout
        parameters: Every learnable tensor
        lambda_reg: Regularization weight λ

    Returns:
        Scalar loss tensor

    Raises:
        ContractError: If the batch is empty or the pairs do not line up
    """
    positives, negatives = _flatten(positive_ratings), _flatten(negative_ratings)
    if positives.size == 0:
        raise ContractError("BPR loss needs at least one positive/negative pair")
    if positives.shape != negatives.shape:
        raise ContractError(f"{positives.size} positive ratings paired with {negatives.size} negative ratings")

    loss = ops.scale(ops.sum(ops.log_sigmoid(ops.sub(positives, negatives))), -1.0)
    if lambda_reg > 0.0 and parameters:
        loss = ops.add(loss, ops.scale(l2_penalty(parameters), lambda_reg))
    return loss
