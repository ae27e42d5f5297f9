"""Corpus statistics reported by ingestion."""
from typing import Dict, List, Optional

from src.domain import DatasetSplit, Interaction, Session


def dataset_statistics(interactions: List[Interaction], sessions: Dict[int, List[Session]],
                       split: Optional[DatasetSplit] = None, skipped_users: int = 0,
                       threshold_seconds: Optional[int] = None) -> Dict:
    """
    Summarize an ingested corpus.

    Args:
        interactions: All parsed interactions
        sessions: Session lists per user
        split: Final split, for the per-split instance counts
        skipped_users: Users dropped for having fewer than 2 sessions
        threshold_seconds: Session threshold in use

    Returns:
        Dictionary with users, items, interactions, sessions, avg sessions per
        user, avg session length, density and instance counts
    """
    users = len({i.user_id for i in interactions})
    items = len({i.item_id for i in interactions})
    session_count = sum(len(s) for s in sessions.values())
    session_items = sum(len(session) for user_sessions in sessions.values() for session in user_sessions)

    stats = {
        'users': users,
        'items': items,
        'interactions': len(interactions),
        'sessions': session_count,
        'avg_sessions_per_user': round(session_count / users, 6) if users else 0.0,
        'avg_session_length': round(session_items / session_count, 6) if session_count else 0.0,
        'density': round(len(interactions) / (users * items), 8) if users and items else 0.0,
        'skipped_users': skipped_users,
    }
    if threshold_seconds is not None:
        stats['threshold_seconds'] = int(threshold_seconds)
    if split is not None:
        stats['instances'] = {name: len(split.portion(name)) for name in split.PORTIONS}
        stats['max_session_length'] = split.max_session_length
    return stats
