"""Rank every item for each instance and aggregate Hit@k, MAP@k and AP@k."""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Protocol, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from src.config.settings import Settings
from src.domain import DatasetSplit, TrainingInstance
from src.errors import ContractError
from src.evaluation.metrics import average_precision_at_k, hit_at_k, map_at_k
from src.evaluation.ranking import rank_scores
from src.utils.logger import logger


DEFAULT_KS = (20, 30)
METRIC_NAMES = ('hit', 'map', 'ap')


class InstanceScorer(Protocol):
    """Anything that rates all M items for an instance."""

    def score_instance(self, instance: TrainingInstance) -> np.ndarray:
        ...


@dataclass
class RankingReport:
    """
    Averaged metrics per cut-off.

    ``metrics[k]`` maps 'hit', 'map' and 'ap' to their instance averages.
    """
    ks: List[int]
    metrics: Dict[int, Dict[str, float]]
    instance_count: int
    top_k: Optional[List[List[int]]] = None
    label: str = ''

    def value(self, metric: str, k: int) -> float:
        return self.metrics[k][metric]

    def to_records(self) -> List[Dict]:
        """One machine-readable record per (k, metric)."""
        return [
            {'k': k, 'metric': name, 'value': self.metrics[k][name], 'instances': self.instance_count}
            for k in self.ks for name in METRIC_NAMES
        ]

    def flat(self) -> Dict[str, float]:
        """Columns such as ``hit@20`` for tables."""
        return {f"{name}@{k}": self.metrics[k][name] for k in self.ks for name in METRIC_NAMES}

    def table(self) -> str:
        """Human-readable table."""
        title = f"Ranking report{' - ' + self.label if self.label else ''} ({self.instance_count} instances)"
        lines = [title, f"{'k':>6}  {'Hit@k':>10}  {'MAP@k':>10}  {'AP@k':>10}"]
        for k in self.ks:
            m = self.metrics[k]
            lines.append(f"{k:>6}  {m['hit']:>10.6f}  {m['map']:>10.6f}  {m['ap']:>10.6f}")
        return '\n'.join(lines)


def check_model_matches_split(config, user_count: int, item_count: int, split: DatasetSplit):
    """
    Ensure a model configuration fits the instance file it is applied to.

    Raises:
        ContractError: Naming both the model and the data shapes
    """
    model_shape = {'N': user_count, 'M': item_count, 'T': config.T, 'm': config.m, 'C': config.C}
    data_shape = {'N': split.user_count, 'M': split.item_count, 'T': split.sessions_per_instance,
                  'm': split.max_session_length, 'C': split.max_delta}
    if model_shape != data_shape:
        raise ContractError(f"checkpoint shape {model_shape} does not match instance header {data_shape}")


def _normalize_ks(ks: Iterable[int]) -> List[int]:
    ks = sorted({int(k) for k in ks})
    if not ks or ks[0] < 1:
        raise ContractError(f"cut-offs must be positive integers, got {ks}")
    return ks


def score_instance_metrics(scores: np.ndarray, instance: TrainingInstance, ks: Sequence[int],
                           exclude_history: bool = False) -> Tuple[Dict[int, Dict[str, float]], List[int]]:
    """Metrics of one instance given its item scores, plus its top-max(k) list."""
    exclude = instance.input_items() if exclude_history else None
    ranking = rank_scores(scores, exclude)
    truth = instance.target_items
    return {
        k: {
            'hit': float(hit_at_k(truth, ranking[:k])),
            'map': map_at_k(truth, ranking, k),
            'ap': average_precision_at_k(truth, ranking, k),
        }
        for k in ks
    }, ranking[:max(ks)].tolist()


class Evaluator:
    """Evaluate a scorer over a list of instances."""

    def __init__(self, ks: Iterable[int] = DEFAULT_KS, exclude_history: bool = False,
                 workers: int = 1, keep_top_k: bool = False, show_progress: bool = None):
        """
        Initialize evaluator.

        Args:
            ks: Cut-offs to report
            exclude_history: Move the instance's input items to the end of the ranking
            workers: Threads scoring instances concurrently
            keep_top_k: Retain every instance's top-max(k) list
            show_progress: tqdm bar (defaults to Settings.SHOW_PROGRESS)
        """
        self.ks = _normalize_ks(ks)
        self.exclude_history = exclude_history
        self.workers = max(1, int(workers))
        self.keep_top_k = keep_top_k
        self.show_progress = Settings.SHOW_PROGRESS if show_progress is None else show_progress

    def evaluate(self, scorer: InstanceScorer, instances: Sequence[TrainingInstance], label: str = '') -> RankingReport:
        """
        Score, rank and measure every instance.

        Results are reduced in instance order with ``math.fsum``, so the report
        does not depend on the number of workers.
        """
        def run(instance):
            return score_instance_metrics(scorer.score_instance(instance), instance, self.ks, self.exclude_history)

        progress = dict(total=len(instances), desc=f"Evaluating {label}".strip(),
                        disable=not self.show_progress, leave=False)
        if self.workers > 1 and len(instances) > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                results = list(tqdm(pool.map(run, instances), **progress))
        else:
            results = [run(instance) for instance in tqdm(instances, **progress)]

        count = len(results)
        if count == 0:
            logger.warning(f"No instances to evaluate{' for ' + label if label else ''}")
        metrics = {
            k: {
                name: (math.fsum(r[0][k][name] for r in results) / count) if count else 0.0
                for name in METRIC_NAMES
            }
            for k in self.ks
        }
        top_k = [r[1] for r in results] if self.keep_top_k else None
        return RankingReport(list(self.ks), metrics, count, top_k, label)


def evaluate(scorer: InstanceScorer, instances: Sequence[TrainingInstance], ks: Iterable[int] = DEFAULT_KS,
             exclude_history: bool = False, workers: int = 1, label: str = '',
             show_progress: bool = None) -> RankingReport:
    """Evaluate ``scorer`` on ``instances`` (see ``Evaluator``)."""
    evaluator = Evaluator(ks, exclude_history=exclude_history, workers=workers, show_progress=show_progress)
    return evaluator.evaluate(scorer, instances, label)


def evaluate_checkpoint(checkpoint, split: DatasetSplit, portion: str = 'test', ks: Iterable[int] = DEFAULT_KS,
                        exclude_history: bool = False, workers: int = 1) -> RankingReport:
    """
    Evaluate a checkpoint on one portion of a split in evaluation mode.

    Args:
        checkpoint: Loaded ``Checkpoint``
        split: Instances the checkpoint was trained for
        portion: 'train', 'validation' or 'test'

    Raises:
        ContractError: If the checkpoint and the instance header disagree
    """
    check_model_matches_split(checkpoint.config, checkpoint.user_count, checkpoint.item_count, split)
    instances = split.portion(portion)
    report = evaluate(checkpoint.model(), instances, ks, exclude_history, workers, label=portion)
    logger.info(f"Evaluated {report.instance_count} {portion} instances: "
                + ', '.join(f"{key}={value:.4f}" for key, value in report.flat().items()))
    return report
