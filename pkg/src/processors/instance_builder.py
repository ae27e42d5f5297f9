"""Window session sequences into fixed-length training instances."""
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from src.domain import Interaction, Session, TrainingInstance
from src.errors import ContractError, DataOrderingError
from src.processors.session_splitter import min_positive_gap
from src.utils.logger import logger


DEFAULT_MAX_DELTA = 128


def pad_session(session: Session, m: int) -> Session:
    """
    Repeat the session's last item until it holds exactly m items.

    Raises:
        ContractError: If the session is empty or longer than m
    """
    length = len(session)
    if length == 0:
        raise ContractError("cannot pad an empty session")
    if length > m:
        raise ContractError(f"session of length {length} exceeds the maximum session length {m}")
    if length == m:
        return session
    items = session.item_ids + (session.item_ids[-1],) * (m - length)
    return Session(items, session.start_ts, session.end_ts)


def fit_session(session: Session, m: int) -> Session:
    """Keep the most recent m items of an over-long session, then pad."""
    if len(session) > m:
        session = Session(session.item_ids[-m:], session.start_ts, session.end_ts)
    return pad_session(session, m)


def compute_time_lag(last_input_ts: int, first_target_ts: int, min_gap_seconds: int,
                     max_delta: int = DEFAULT_MAX_DELTA) -> Tuple[int, int]:
    """
    Lag between the last input interaction and the first target interaction.

    δ = min(ceil(Δt / Δ_min), C), raised to at least 1 so that δ ∈ [1, C].

    Args:
        last_input_ts: Timestamp of the last interaction of the input sessions
        first_target_ts: Timestamp of the first interaction of the target session
        min_gap_seconds: The user's smallest strictly positive interaction gap
        max_delta: C, the largest discretized lag

    Returns:
        Tuple of (Δt in seconds, δ)

    Raises:
        DataOrderingError: If the target starts before the inputs end
    """
    lag = int(first_target_ts) - int(last_input_ts)
    if lag < 0:
        raise DataOrderingError(
            f"target starts at {first_target_ts}, before the last input interaction at {last_input_ts}"
        )
    if min_gap_seconds <= 0:
        raise ContractError(f"minimum gap must be positive, got {min_gap_seconds}")
    delta = min(math.ceil(lag / min_gap_seconds), max_delta)
    return lag, max(1, delta)


@dataclass
class WindowResult:
    """Instances built from every eligible user plus the users that were skipped."""
    instances: List[TrainingInstance] = field(default_factory=list)
    skipped_users: List[int] = field(default_factory=list)


class InstanceBuilder:
    """
    Turn per-user session sequences into T-session training instances.

    Sequences longer than T+1 sessions are cut by a width-(T+1) sliding window
    with stride 1; shorter ones are left-padded with their first session.
    """

    def __init__(self, sessions_per_instance: int, max_delta: int = DEFAULT_MAX_DELTA):
        """
        Initialize instance builder.

        Args:
            sessions_per_instance: T, the number of input sessions
            max_delta: C, the largest discretized lag
        """
        if sessions_per_instance < 1:
            raise ValueError(f"sessions_per_instance must be >= 1, got {sessions_per_instance}")
        if max_delta < 1:
            raise ValueError(f"max_delta must be >= 1, got {max_delta}")
        self.T = sessions_per_instance
        self.max_delta = max_delta

    def windows(self, sessions: Sequence[Session]) -> List[Tuple[Tuple[Session, ...], Session]]:
        """Return (input sessions, target session) pairs for one user."""
        T = self.T
        count = len(sessions)
        if count < 2:
            return []
        if count <= T + 1:
            padded = [sessions[0]] * (T + 1 - count) + list(sessions)
            return [(tuple(padded[:T]), padded[T])]
        return [(tuple(sessions[i:i + T]), sessions[i + T]) for i in range(count - T)]

    def build_user(self, user_id: int, sessions: Sequence[Session], min_gap: int) -> List[TrainingInstance]:
        """Build every instance of one user."""
        instances = []
        for inputs, target in self.windows(sessions):
            lag, delta = compute_time_lag(inputs[-1].end_ts, target.start_ts, min_gap, self.max_delta)
            instances.append(TrainingInstance(
                user_id=user_id,
                input_sessions=inputs,
                target_items=tuple(sorted(set(target.item_ids))),
                time_lag_seconds=lag,
                delta_index=delta,
                target_start_ts=target.start_ts,
            ))
        return instances

    def build_all(self, sessions: Dict[int, List[Session]],
                  interactions: Optional[Dict[int, List[Interaction]]] = None) -> WindowResult:
        """
        Build instances for every user.

        Args:
            sessions: Session lists per user
            interactions: Time-sorted interactions per user, for Δ_min; when
                          missing, gaps are taken from session boundaries only

        Returns:
            WindowResult with instances in user order and skipped user ids
        """
        result = WindowResult()
        fallback_users = 0
        for user_id, user_sessions in sessions.items():
            if len(user_sessions) < 2:
                result.skipped_users.append(user_id)
                continue

            min_gap = self._user_min_gap(user_sessions, (interactions or {}).get(user_id))
            if min_gap is None:
                fallback_users += 1
                min_gap = 1
            result.instances.extend(self.build_user(user_id, user_sessions, min_gap))

        if result.skipped_users:
            logger.warning(f"Skipped {len(result.skipped_users)} users with fewer than 2 sessions")
        if fallback_users:
            logger.warning(f"{fallback_users} users have no positive interaction gap; using Δ_min = 1s")
        logger.info(f"Built {len(result.instances)} instances with T={self.T}, C={self.max_delta}")
        return result

    @staticmethod
    def _user_min_gap(sessions: Sequence[Session], events: Optional[Sequence[Interaction]]) -> Optional[int]:
        if events is not None:
            return min_positive_gap(events)
        gaps = [b.start_ts - a.end_ts for a, b in zip(sessions, sessions[1:])]
        positive = [g for g in gaps if g > 0]
        return min(positive) if positive else None


def window_instances(sessions: Dict[int, List[Session]], T: int,
                     interactions: Optional[Dict[int, List[Interaction]]] = None,
                     max_delta: int = DEFAULT_MAX_DELTA) -> WindowResult:
    """Sliding-window instances for every user (see ``InstanceBuilder``)."""
    return InstanceBuilder(T, max_delta).build_all(sessions, interactions)
