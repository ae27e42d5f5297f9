"""Group interactions per user and cut them into sessions by time gap."""
from collections import defaultdict
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from src.domain import Interaction, Session
from src.utils.logger import logger


HOUR = 3600
DAY = 24 * HOUR

# Candidate thresholds examined by suggest_session_threshold
DEFAULT_THRESHOLD_CANDIDATES = (
    HOUR // 2, HOUR, 2 * HOUR, 6 * HOUR, 12 * HOUR, DAY, 2 * DAY, 7 * DAY
)


def group_by_user(interactions: Iterable[Interaction]) -> Dict[int, List[Interaction]]:
    """
    Collect each user's interactions sorted by timestamp.

    The sort is stable, so same-timestamp events keep their file order.
    """
    grouped: Dict[int, List[Interaction]] = defaultdict(list)
    for interaction in interactions:
        grouped[interaction.user_id].append(interaction)
    return {user: sorted(events, key=lambda e: e.timestamp) for user, events in sorted(grouped.items())}


class SessionSplitter:
    """
    Split time-sorted interaction lists into sessions.

    A new session starts exactly when the gap to the previous interaction is
    larger than the threshold.
    """

    def __init__(self, threshold_seconds: int):
        """
        Initialize session splitter.

        Args:
            threshold_seconds: Largest gap allowed inside one session (> 0)
        """
        if threshold_seconds <= 0:
            raise ValueError(f"session threshold must be positive, got {threshold_seconds}")
        self.threshold_seconds = int(threshold_seconds)

    def split_user(self, events: Sequence[Interaction]) -> List[Session]:
        """
        Split one user's time-sorted interactions.

        Args:
            events: Interactions of a single user, sorted by timestamp

        Returns:
            Sessions in time order
        """
        sessions: List[Session] = []
        if not events:
            return sessions

        items = [events[0].item_id]
        start = previous = events[0].timestamp
        for event in events[1:]:
            if event.timestamp - previous > self.threshold_seconds:
                sessions.append(Session(tuple(items), start, previous))
                items, start = [], event.timestamp
            items.append(event.item_id)
            previous = event.timestamp
        sessions.append(Session(tuple(items), start, previous))
        return sessions

    def split_all(self, grouped: Dict[int, List[Interaction]]) -> Dict[int, List[Session]]:
        """Split every user's interactions; users keep their dense order."""
        sessions = {user: self.split_user(events) for user, events in grouped.items()}
        total = sum(len(s) for s in sessions.values())
        logger.info(f"Split {len(sessions)} users into {total} sessions "
                    f"(threshold {self.threshold_seconds}s)")
        return sessions


def split_sessions(grouped: Dict[int, List[Interaction]], threshold_seconds: int) -> Dict[int, List[Session]]:
    """Per-user session lists for time-sorted interactions (see ``SessionSplitter``)."""
    return SessionSplitter(threshold_seconds).split_all(grouped)


def positive_gaps(events: Sequence[Interaction]) -> np.ndarray:
    """Strictly positive gaps between successive interactions of one user."""
    if len(events) < 2:
        return np.zeros(0, dtype=np.int64)
    stamps = np.fromiter((e.timestamp for e in events), dtype=np.int64, count=len(events))
    gaps = np.diff(stamps)
    return gaps[gaps > 0]


def min_positive_gap(events: Sequence[Interaction]) -> Optional[int]:
    """Smallest strictly positive successive gap of one user, or None."""
    gaps = positive_gaps(events)
    return int(gaps.min()) if gaps.size else None


def suggest_session_threshold(
    grouped: Dict[int, List[Interaction]],
    candidates: Sequence[int] = DEFAULT_THRESHOLD_CANDIDATES,
    coverage: float = 0.8
) -> int:
    """
    Pick the session threshold from the distribution of successive gaps.

    Returns the smallest candidate that covers at least ``coverage`` of all
    strictly positive gaps, or the largest candidate when none does.

    Args:
        grouped: Time-sorted interactions per user
        candidates: Thresholds to consider, in seconds
        coverage: Required fraction of gaps not exceeding the threshold
    """
    candidates = sorted(int(c) for c in candidates)
    gaps = [positive_gaps(events) for events in grouped.values()]
    all_gaps = np.concatenate(gaps) if gaps else np.zeros(0, dtype=np.int64)

    if all_gaps.size == 0:
        logger.warning("No positive time gaps found; using the largest threshold candidate")
        return candidates[-1]

    for candidate in candidates:
        covered = float(np.mean(all_gaps <= candidate))
        if covered >= coverage:
            logger.info(f"Suggested session threshold {candidate}s covers {covered:.1%} of gaps")
            return candidate

    logger.info(f"No candidate covers {coverage:.0%} of gaps; using {candidates[-1]}s")
    return candidates[-1]
