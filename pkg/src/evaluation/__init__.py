"""Ranking metrics, evaluation reports and inspection exports."""
from src.evaluation.metrics import average_precision_at_k, hit_at_k, map_at_k
from src.evaluation.ranking import rank_items, rank_scores
from src.evaluation.evaluator import Evaluator, RankingReport, evaluate, evaluate_checkpoint

__all__ = [
    'Evaluator',
    'RankingReport',
    'average_precision_at_k',
    'evaluate',
    'evaluate_checkpoint',
    'hit_at_k',
    'map_at_k',
    'rank_items',
    'rank_scores',
]
