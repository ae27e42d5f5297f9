"""Tests for per-user grouping, session splitting and threshold suggestion."""
import sys
from pathlib import Path

import pytest

# Add project root to path
project_root = Path(__file__).parent.parent
if str(project_root) not in sys.path:
    sys.path.insert(0, str(project_root))

from src.domain import Interaction
from src.processors.session_splitter import (
    HOUR,
    SessionSplitter,
    group_by_user,
    min_positive_gap,
    positive_gaps,
    split_sessions,
    suggest_session_threshold,
)


def events(user, stamps, first_item=0):
    return [Interaction(user, first_item + k, ts) for k, ts in enumerate(stamps)]


def test_group_by_user_sorts_stably():
    log = [Interaction(1, 5, 30), Interaction(0, 1, 20), Interaction(1, 6, 10), Interaction(1, 7, 30)]
    grouped = group_by_user(log)
    assert list(grouped) == [0, 1]
    assert [e.item_id for e in grouped[1]] == [6, 5, 7]


def test_gap_equal_to_threshold_stays_in_session():
    sessions = SessionSplitter(100).split_user(events(0, [0, 100, 201, 250]))
    assert [s.item_ids for s in sessions] == [(0, 1), (2, 3)]
    assert (sessions[1].start_ts, sessions[1].end_ts) == (201, 250)


def test_two_hour_threshold_splits_movielens_style_log():
    stamps = [0, 3000, 7200 + 3000, 7200 + 3001 + 7200]
    sessions = split_sessions({0: events(0, stamps)}, 7200)[0]
    assert [len(s) for s in sessions] == [3, 1]


def test_single_interaction_gives_single_session():
    sessions = SessionSplitter(10).split_user(events(0, [5]))
    assert len(sessions) == 1
    assert sessions[0].start_ts == sessions[0].end_ts == 5


def test_threshold_must_be_positive():
    with pytest.raises(ValueError):
        SessionSplitter(0)


def test_positive_gaps_skip_ties():
    user_events = events(0, [10, 10, 15, 40, 40])
    assert positive_gaps(user_events).tolist() == [5, 25]
    assert min_positive_gap(user_events) == 5
    assert min_positive_gap(events(0, [7, 7])) is None


def test_suggested_threshold_covers_the_requested_share():
    # 8 short gaps of 10 minutes and 2 gaps of 3 days
    stamps, ts = [], 0
    for gap in [600] * 8 + [3 * 24 * HOUR] * 2:
        stamps.append(ts)
        ts += gap
    stamps.append(ts)
    grouped = {0: events(0, stamps)}
    assert suggest_session_threshold(grouped, coverage=0.8) == HOUR // 2
    assert suggest_session_threshold(grouped, coverage=0.9) == 7 * 24 * HOUR


def test_suggested_threshold_without_gaps_is_the_largest_candidate():
    assert suggest_session_threshold({0: events(0, [5])}, candidates=[60, 120]) == 120


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
