"""Tests for windowing, time lags, splitting, negatives, instance files and validation."""
import sys
from pathlib import Path

import numpy as np
import pytest

# Add project root to path
project_root = Path(__file__).parent.parent
if str(project_root) not in sys.path:
    sys.path.insert(0, str(project_root))

from src.config.settings import Settings
from src.domain import Interaction, Session, TrainingInstance
from src.errors import CheckpointError, ContractError, DataOrderingError, InputFileError, InstanceFileError
from src.exporters.instance_file import InstanceFileWriter, write_instance_file
from src.extractors.instance_file import read_instance_file
from src.processors.dataset_splitter import split_dataset, split_sizes
from src.processors.dataset_statistics import dataset_statistics
from src.processors.instance_builder import InstanceBuilder, compute_time_lag, fit_session, pad_session
from src.processors.negative_sampler import sample_negatives
from src.processors.synthetic_corpus import lag_mixture_corpus, memorization_corpus
from src.validators.split_validator import SplitValidator


def session(items, start, end=None):
    return Session(tuple(items), start, start if end is None else end)


def sessions_at(starts):
    return [session([k], ts) for k, ts in enumerate(starts)]


def test_sliding_window_count():
    windows = InstanceBuilder(3).windows(sessions_at(range(0, 700, 100)))
    assert len(windows) == 4
    inputs, target = windows[-1]
    assert [s.item_ids[0] for s in inputs] == [3, 4, 5]
    assert target.item_ids == (6,)


def test_short_history_is_left_padded_with_first_session():
    windows = InstanceBuilder(4).windows(sessions_at([0, 100, 200]))
    assert len(windows) == 1
    inputs, target = windows[0]
    assert [s.item_ids[0] for s in inputs] == [0, 0, 0, 1]
    assert target.item_ids == (2,)


def test_user_with_one_session_is_skipped():
    result = InstanceBuilder(2).build_all({0: sessions_at([0]), 1: sessions_at([0, 50, 100])})
    assert result.skipped_users == [0]
    assert {inst.user_id for inst in result.instances} == {1}


def test_targets_are_deduplicated_and_sorted():
    user_sessions = [session([4], 0), session([9, 2, 9], 100, 120)]
    instance = InstanceBuilder(1).build_user(0, user_sessions, min_gap=20)[0]
    assert instance.target_items == (2, 9)


def test_pad_session_repeats_last_item():
    padded = pad_session(session([3, 5], 0, 9), 4)
    assert padded.item_ids == (3, 5, 5, 5)
    assert (padded.start_ts, padded.end_ts) == (0, 9)
    with pytest.raises(ContractError):
        pad_session(session([1, 2, 3], 0), 2)


def test_fit_session_keeps_most_recent_items():
    assert fit_session(session([1, 2, 3, 4], 0), 2).item_ids == (3, 4)


def test_time_lag_discretization():
    assert compute_time_lag(1000, 1000 + 7200, 3600, 128) == (7200, 2)
    assert compute_time_lag(1000, 1000 + 7201, 3600, 128) == (7201, 3)
    assert compute_time_lag(0, 10 ** 9, 1, 128) == (10 ** 9, 128)
    assert compute_time_lag(50, 50, 10, 128) == (0, 1)


def test_negative_time_lag_is_rejected():
    with pytest.raises(DataOrderingError):
        compute_time_lag(100, 50, 1)


def test_lag_uses_the_users_smallest_gap():
    interactions = [Interaction(0, 0, 0), Interaction(0, 1, 600), Interaction(0, 2, 600 + 3 * 3600)]
    user_sessions = [session([0, 1], 0, 600), session([2], 600 + 3 * 3600)]
    result = InstanceBuilder(1, max_delta=50).build_all({0: user_sessions}, {0: interactions})
    assert result.instances[0].delta_index == 18


@pytest.mark.parametrize("count, expected", [
    (0, (0, 0, 0)),
    (1, (1, 0, 0)),
    (2, (1, 0, 1)),
    (3, (1, 1, 1)),
    (10, (7, 1, 2)),
    (27, (19, 3, 5)),
])
def test_split_sizes(count, expected):
    assert split_sizes(count, (0.7, 0.1, 0.2)) == expected


def test_zero_ratio_split_stays_empty():
    assert split_sizes(5, (0.8, 0.0, 0.2)) == (4, 0, 1)


@pytest.mark.parametrize("ratios, expected", [
    ((0.7, 0.1, 0.2), (1, 0, 1)),
    ((0.9, 0.1, 0.0), (1, 1, 0)),
    ((1.0, 0.0, 0.0), (2, 0, 0)),
])
def test_two_instances_skip_zero_ratio_splits(ratios, expected):
    assert split_sizes(2, ratios) == expected


def test_split_is_per_user_and_deterministic(memorization_split):
    assert (len(memorization_split.train), len(memorization_split.validation), len(memorization_split.test)) \
        == (76, 12, 20)
    for user in range(4):
        assert sum(1 for inst in memorization_split.train if inst.user_id == user) == 19
    assert memorization_split.max_session_length == 1


def test_evaluation_sessions_longer_than_m_are_truncated():
    def instance(user, length, ts):
        sessions = (session(range(length), ts), session(range(length), ts + 10))
        return TrainingInstance(user, sessions, (0,), 5, 1, ts + 20)

    instances = [instance(0, 2, 0), instance(0, 5, 100), instance(0, 2, 200)]
    split = split_dataset(instances, (0.34, 0.33, 0.33), seed=3, item_count=5, user_count=1,
                          sessions_per_instance=2)
    for inst in split.all_instances():
        assert all(len(s) == split.max_session_length for s in inst.input_sessions)


def test_instance_file_round_trip_is_byte_stable(memorization_split, tmp_path):
    first = write_instance_file(memorization_split, tmp_path / 'a.jsonl')
    loaded = read_instance_file(first)
    second = write_instance_file(loaded, tmp_path / 'b.jsonl')

    assert first.read_bytes() == second.read_bytes()
    assert loaded.train == memorization_split.train
    assert loaded.id_mapping.user_ids == ['u0', 'u1', 'u2', 'u3']


def test_header_echo_omits_id_tables(memorization_split, tmp_path):
    path = InstanceFileWriter().write_header_echo(memorization_split, tmp_path / 'header.json')
    text = path.read_text(encoding='utf-8')
    assert '"item_count": 20' in text
    assert 'user_ids' not in text


def test_instance_file_errors(tmp_path):
    with pytest.raises(InputFileError):
        read_instance_file(tmp_path / 'missing.jsonl')

    wrong = tmp_path / 'wrong.jsonl'
    wrong.write_text('{"format": "tlsrec-instances", "format_version": 99}\n', encoding='utf-8')
    with pytest.raises(InstanceFileError) as excinfo:
        read_instance_file(wrong)
    assert 'version' in str(excinfo.value)

    not_json = tmp_path / 'not_json.jsonl'
    not_json.write_text('user,item,timestamp\n', encoding='utf-8')
    with pytest.raises(InstanceFileError) as excinfo:
        read_instance_file(not_json)
    assert excinfo.value.error_class == 'InstanceFileError'
    assert not isinstance(excinfo.value, CheckpointError)


def test_malformed_instance_line(memorization_split, tmp_path):
    path = write_instance_file(memorization_split, tmp_path / 'instances.jsonl')
    with open(path, 'a', encoding='utf-8') as f:
        f.write('{"split": "train"}\n')
    with pytest.raises(InstanceFileError) as excinfo:
        read_instance_file(path)
    assert 'line' in str(excinfo.value)


def test_instance_file_reads_back_in_the_configured_encoding(memorization_split, tmp_path, monkeypatch):
    monkeypatch.setattr(Settings, 'OUTPUT_ENCODING', 'utf-16')
    path = write_instance_file(memorization_split, tmp_path / 'instances.jsonl')
    assert path.read_bytes()[:2] in (b'\xff\xfe', b'\xfe\xff')

    loaded = read_instance_file(path)
    assert loaded.test == memorization_split.test
    assert loaded.item_count == memorization_split.item_count


def test_negatives_avoid_targets(rng):
    for _ in range(50):
        negatives = sample_negatives([0, 3, 5], 8, rng)
        assert len(negatives) == 3
        assert not set(negatives) & {0, 3, 5}


def test_negatives_are_seeded():
    first = sample_negatives([1], 100, np.random.default_rng(9))
    second = sample_negatives([1], 100, np.random.default_rng(9))
    assert first == second


def test_negatives_need_an_unobserved_item(rng):
    with pytest.raises(ContractError):
        sample_negatives([0, 1], 2, rng)


def test_validator_passes_ingested_split(memorization_split):
    report = SplitValidator().validate_all(memorization_split)
    assert report['passed']
    assert report['errors'] == []
    assert report['statistics']['instances'] == 108


def test_validator_catches_broken_instances(memorization_split):
    bad = memorization_split.train[0]
    memorization_split.train[0] = TrainingInstance(bad.user_id, bad.input_sessions, (), bad.time_lag_seconds,
                                                   memorization_split.max_delta + 1, bad.target_start_ts)
    memorization_split.test.append(memorization_split.train[1])
    report = SplitValidator().validate_all(memorization_split)
    assert not report['passed']
    joined = ' '.join(report['errors'])
    assert 'target' in joined
    assert 'δ' in joined or 'delta' in joined
    assert 'appears in' in joined


def test_dataset_statistics_schema(memorization_split):
    corpus_interactions = [Interaction(u, u * 5 + k % 5, k) for u in range(4) for k in range(30)]
    sessions = {u: [session([u * 5 + k % 5], k * 86400) for k in range(30)] for u in range(4)}
    stats = dataset_statistics(corpus_interactions, sessions, memorization_split, threshold_seconds=7200)
    assert stats['users'] == 4
    assert stats['items'] == 20
    assert stats['sessions'] == 120
    assert stats['avg_session_length'] == 1.0
    assert stats['density'] == round(120 / 80, 8)
    assert stats['instances'] == {'train': 76, 'validation': 12, 'test': 20}


def test_memorization_corpus_is_cyclic():
    frame = memorization_corpus(users=2, items_per_user=3, sessions_per_user=7)
    user1 = frame[frame['user'] == 'u1']['item'].tolist()
    assert user1 == ['i3', 'i4', 'i5', 'i3', 'i4', 'i5', 'i3']
    assert frame['timestamp'].diff().dropna().isin([86400, -6 * 86400]).all()


def test_lag_mixture_corpus_is_seeded():
    first = lag_mixture_corpus(users=6, groups=3, sessions_per_user=10, seed=4)
    second = lag_mixture_corpus(users=6, groups=3, sessions_per_user=10, seed=4)
    assert first.equals(second)
    assert set(first.columns) == {'user', 'item', 'timestamp'}


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
