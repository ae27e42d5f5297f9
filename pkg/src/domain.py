"""Data types shared by ingestion, training and evaluation."""
from dataclasses import dataclass, field, replace
from typing import Dict, List, Tuple

import numpy as np


@dataclass(frozen=True)
class Interaction:
    """One implicit-feedback event with dense user/item indices."""
    user_id: int
    item_id: int
    timestamp: int


@dataclass(frozen=True)
class Session:
    """A maximal run of one user's interactions without an over-threshold gap."""
    item_ids: Tuple[int, ...]
    start_ts: int
    end_ts: int

    def __len__(self) -> int:
        return len(self.item_ids)


@dataclass(frozen=True)
class TrainingInstance:
    """
    T input sessions, the target session that follows them, and the lag between.

    ``delta_index`` is the discretized lag in [1, C].
    """
    user_id: int
    input_sessions: Tuple[Session, ...]
    target_items: Tuple[int, ...]
    time_lag_seconds: int
    delta_index: int
    target_start_ts: int = 0

    def item_matrix(self) -> np.ndarray:
        """T×m matrix of input item ids (sessions must already be padded)."""
        return np.array([s.item_ids for s in self.input_sessions], dtype=np.int64)

    def input_items(self) -> List[int]:
        """Distinct items of the input sessions, in first-seen order."""
        seen: Dict[int, None] = {}
        for session in self.input_sessions:
            for item in session.item_ids:
                seen.setdefault(item, None)
        return list(seen)

    def with_sessions(self, sessions: Tuple[Session, ...]) -> 'TrainingInstance':
        return replace(self, input_sessions=tuple(sessions))


@dataclass
class IdMapping:
    """Dense index ↔ raw identifier tables produced by ingestion."""
    user_ids: List[str] = field(default_factory=list)
    item_ids: List[str] = field(default_factory=list)

    @property
    def user_count(self) -> int:
        return len(self.user_ids)

    @property
    def item_count(self) -> int:
        return len(self.item_ids)

    def user_index(self, raw_id: str) -> int:
        """Dense index of a raw user id; -1 if unknown."""
        try:
            return self.user_ids.index(raw_id)
        except ValueError:
            return -1


@dataclass
class DatasetSplit:
    """Train/validation/test instances plus the shape metadata they share."""
    train: List[TrainingInstance]
    validation: List[TrainingInstance]
    test: List[TrainingInstance]
    item_count: int
    user_count: int
    max_session_length: int
    sessions_per_instance: int
    max_delta: int = 128
    threshold_seconds: int = 0
    seed: int = 0
    ratios: Tuple[float, float, float] = (0.7, 0.1, 0.2)
    id_mapping: IdMapping = field(default_factory=IdMapping)

    PORTIONS = ('train', 'validation', 'test')

    def portion(self, name: str) -> List[TrainingInstance]:
        """Return the instances of one split by name."""
        if name not in self.PORTIONS:
            raise KeyError(f"unknown split {name!r}; expected one of {', '.join(self.PORTIONS)}")
        return getattr(self, name)

    def all_instances(self) -> List[TrainingInstance]:
        return self.train + self.validation + self.test
