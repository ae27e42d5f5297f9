"""Dataset split validation and quality checking."""
from collections import Counter
from typing import Dict, List

from src.domain import DatasetSplit, TrainingInstance
from src.utils.logger import logger


class SplitValidator:
    """
    Validates padded instances against the dataset invariants.

    Checks:
    - T input sessions of exactly m items each
    - Item, user and lag indices in range
    - Non-empty targets
    - Input sessions end before the target session starts
    - Splits are disjoint
    """

    def __init__(self):
        """Initialize split validator."""
        self.errors: List[str] = []
        self.warnings: List[str] = []
        self.stats: Dict = {}

    def validate_all(self, split: DatasetSplit, max_delta: int = None) -> Dict:
        """
        Validate every portion of a split and generate a quality report.

        Args:
            split: Padded dataset split
            max_delta: C; defaults to the split's own value

        Returns:
            Validation report with errors, warnings, statistics and passed flag
        """
        logger.info("Starting split validation")

        self.errors = []
        self.warnings = []
        self.stats = {}
        max_delta = max_delta or split.max_delta

        for portion in split.PORTIONS:
            for index, instance in enumerate(split.portion(portion)):
                self._validate_instance(instance, f"{portion}[{index}]", split, max_delta)

        self._validate_disjoint(split)
        self._generate_quality_stats(split)

        report = {
            'errors': self.errors,
            'warnings': self.warnings,
            'statistics': self.stats,
            'passed': len(self.errors) == 0
        }

        logger.info(
            f"Validation complete: {len(self.errors)} errors, "
            f"{len(self.warnings)} warnings"
        )

        return report

    def _validate_instance(self, instance: TrainingInstance, label: str, split: DatasetSplit, max_delta: int):
        T, m = split.sessions_per_instance, split.max_session_length

        if len(instance.input_sessions) != T:
            self.errors.append(f"Instance {label}: {len(instance.input_sessions)} input sessions, expected {T}")

        for position, session in enumerate(instance.input_sessions):
            if len(session) != m:
                self.errors.append(f"Instance {label}: session {position} has {len(session)} items, expected {m}")
            if any(not 0 <= item < split.item_count for item in session.item_ids):
                self.errors.append(f"Instance {label}: session {position} has an item outside [0, {split.item_count})")
            if session.start_ts > session.end_ts:
                self.errors.append(f"Instance {label}: session {position} ends before it starts")

        if not instance.target_items:
            self.errors.append(f"Instance {label}: empty target set")
        elif any(not 0 <= item < split.item_count for item in instance.target_items):
            self.errors.append(f"Instance {label}: target item outside [0, {split.item_count})")

        if not 0 <= instance.user_id < max(split.user_count, 1):
            self.errors.append(f"Instance {label}: user {instance.user_id} outside [0, {split.user_count})")

        if not 1 <= instance.delta_index <= max_delta:
            self.errors.append(f"Instance {label}: δ={instance.delta_index} outside [1, {max_delta}]")

        if instance.input_sessions and instance.target_start_ts:
            if instance.input_sessions[-1].end_ts > instance.target_start_ts:
                self.errors.append(f"Instance {label}: input sessions end after the target starts")

        if instance.time_lag_seconds < 0:
            self.errors.append(f"Instance {label}: negative time lag {instance.time_lag_seconds}")

    def _validate_disjoint(self, split: DatasetSplit):
        """The same instance (user, target start) must not appear in two splits."""
        owner: Dict[tuple, str] = {}
        for portion in split.PORTIONS:
            for instance in split.portion(portion):
                key = (instance.user_id, instance.target_start_ts, instance.target_items)
                if key in owner and owner[key] != portion:
                    self.errors.append(f"Instance of user {instance.user_id} appears in {owner[key]} and {portion}")
                owner.setdefault(key, portion)

    def _generate_quality_stats(self, split: DatasetSplit):
        instances = split.all_instances()
        deltas = Counter(inst.delta_index for inst in instances)
        users_by_portion = {name: {inst.user_id for inst in split.portion(name)} for name in split.PORTIONS}

        self.stats = {
            'instances': len(instances),
            'users_with_instances': len(set().union(*users_by_portion.values())),
            'users_per_split': {name: len(users) for name, users in users_by_portion.items()},
            'avg_target_size': round(sum(len(i.target_items) for i in instances) / len(instances), 6)
            if instances else 0.0,
            'delta_saturated': deltas.get(split.max_delta, 0),
        }

        if not split.train:
            self.warnings.append("Training split is empty")
        if not split.validation:
            self.warnings.append("Validation split is empty; early stopping falls back to training loss")
        if instances and deltas.get(split.max_delta, 0) > 0.5 * len(instances):
            self.warnings.append(f"More than half of the instances have δ clamped to C={split.max_delta}")
