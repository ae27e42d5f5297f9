"""
Synthetic interaction logs with planted sequential structure.

Both generators return a DataFrame with columns user, item, timestamp sorted
by user and time, ready to be written as a headerless ``user,item,timestamp``
CSV and read back by the interaction reader.
"""
from pathlib import Path
from typing import Union

import numpy as np
import pandas as pd

from src.utils.logger import logger


HOUR = 3600
DAY = 24 * HOUR
BASE_TIMESTAMP = 1_600_000_000

CORPUS_COLUMNS = ['user', 'item', 'timestamp']


def memorization_corpus(users: int = 4, items_per_user: int = 5, sessions_per_user: int = 30,
                        start_ts: int = BASE_TIMESTAMP) -> pd.DataFrame:
    """
    Deterministic corpus whose next session is a function of the last one.

    User u owns the item block [u*items_per_user, (u+1)*items_per_user) and
    visits it cyclically, one item per session, one session per day: session
    k holds item ``u*items_per_user + k % items_per_user``.

    Args:
        users: Number of users
        items_per_user: Size of every user's item block (M = users * items_per_user)
        sessions_per_user: Sessions generated per user

    Returns:
        DataFrame with one row per interaction
    """
    if users < 1 or items_per_user < 2 or sessions_per_user < 2:
        raise ValueError("memorization corpus needs >= 1 user, >= 2 items per user and >= 2 sessions")

    rows = []
    for user in range(users):
        for k in range(sessions_per_user):
            item = user * items_per_user + k % items_per_user
            rows.append((f"u{user}", f"i{item}", start_ts + k * DAY))

    frame = pd.DataFrame(rows, columns=CORPUS_COLUMNS)
    logger.info(f"Generated memorization corpus: {users} users, "
                f"{users * items_per_user} items, {len(frame)} interactions")
    return frame


def drift_stay_probability(lag_hours: int, min_lag_hours: int, max_lag_hours: int) -> float:
    """Probability that a drift continues after ``lag_hours``: 1 at the shortest lag, 0 at the longest."""
    span = max_lag_hours - min_lag_hours
    if span <= 0:
        return 1.0
    return float(np.clip((max_lag_hours - lag_hours) / span, 0.0, 1.0))


def lag_mixture_corpus(users: int = 48, groups: int = 8, items_per_group: int = 6,
                       sessions_per_user: int = 40, items_per_session: int = 3,
                       min_lag_hours: int = 3, max_lag_hours: int = 12,
                       drift_probability: float = 0.5, seed: int = 0,
                       start_ts: int = BASE_TIMESTAMP) -> pd.DataFrame:
    """
    Corpus whose next session interpolates between short- and long-term taste.

    Every user has a home item group. After a home session, the next session
    drifts to a random other group with probability ``drift_probability``.
    After a drift session, the next one stays in that drift group with a
    probability falling linearly in the lag (``min_lag_hours`` gives 1,
    ``max_lag_hours`` gives 0) and returns home otherwise. A short lag thus
    favors the last session and a long lag favors the home group.

    Items inside a session are one hour apart; sessions are separated by a
    whole number of hours drawn uniformly from [min_lag_hours, max_lag_hours],
    so a 2-hour threshold recovers the sessions and Δ_min is one hour.

    Args:
        users: Number of users (user u's home group is u % groups)
        groups: Number of item groups
        items_per_group: Items per group (M = groups * items_per_group)
        sessions_per_user: Sessions per user
        items_per_session: Distinct items drawn per session
        seed: Seed of the generator

    Returns:
        DataFrame with one row per interaction
    """
    if groups < 2:
        raise ValueError(f"lag mixture corpus needs at least 2 groups, got {groups}")
    if not 1 <= items_per_session <= items_per_group:
        raise ValueError(f"items_per_session must be in [1, {items_per_group}], got {items_per_session}")
    if not 1 < min_lag_hours <= max_lag_hours:
        raise ValueError("lags must satisfy 1 < min_lag_hours <= max_lag_hours")

    rng = np.random.default_rng(seed)
    rows = []
    drift_sessions = 0

    for user in range(users):
        home = user % groups
        group = home
        clock = start_ts + user * DAY

        for k in range(sessions_per_user):
            if k > 0:
                lag_hours = int(rng.integers(min_lag_hours, max_lag_hours + 1))
                clock += lag_hours * HOUR
                if group != home:
                    if rng.random() >= drift_stay_probability(lag_hours, min_lag_hours, max_lag_hours):
                        group = home
                elif rng.random() < drift_probability:
                    others = [g for g in range(groups) if g != home]
                    group = int(rng.choice(others))

            drift_sessions += group != home
            members = rng.choice(items_per_group, size=items_per_session, replace=False)
            for offset, member in enumerate(members):
                item = group * items_per_group + int(member)
                rows.append((f"u{user}", f"i{item}", clock + offset * HOUR))
            clock += (items_per_session - 1) * HOUR

    frame = pd.DataFrame(rows, columns=CORPUS_COLUMNS)
    logger.info(f"Generated lag mixture corpus: {users} users, {groups * items_per_group} items, "
                f"{len(frame)} interactions, {drift_sessions} drift sessions")
    return frame


def write_corpus(frame: pd.DataFrame, filepath: Union[str, Path]) -> Path:
    """Write a corpus as a headerless ``user,item,timestamp`` CSV."""
    filepath = Path(filepath)
    filepath.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(filepath, index=False, header=False, columns=CORPUS_COLUMNS, lineterminator='\n')
    logger.info(f"Wrote {len(frame)} interactions to {filepath}")
    return filepath
