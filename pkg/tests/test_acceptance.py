"""
Slow end-to-end experiments on the planted lag-mixture corpus.

Run them alone with ``pytest -m slow`` and skip them with ``-m "not slow"``.
"""
import sys
from pathlib import Path

import numpy as np
import pytest

# Add project root to path
project_root = Path(__file__).parent.parent
if str(project_root) not in sys.path:
    sys.path.insert(0, str(project_root))

from conftest import ingest_frame
from src.evaluation import evaluate_checkpoint
from src.processors.synthetic_corpus import lag_mixture_corpus
from src.recommender import ModelConfig
from src.training import TrainConfig, train


MAX_DELTA = 12
T = 5


def model_config(variant='full', m=3):
    return ModelConfig(d=16, h=2, T=T, m=m, C=MAX_DELTA, dropout_rate=0.1, variant=variant)


def train_config(seed=0, epochs=30):
    return TrainConfig(learning_rate=0.005, batch_size=32, epochs=epochs, lambda_reg=1e-5,
                       early_stop_patience=5, validation_k=20, seed=seed)


@pytest.mark.slow
def test_gate_decays_with_the_time_lag(tmp_path):
    split = ingest_frame(lag_mixture_corpus(seed=0), tmp_path, T=T, max_delta=MAX_DELTA)
    result = train(split, model_config(m=split.max_session_length), train_config(), show_progress=False)
    model = result.checkpoint.model()

    first_per_user = {}
    for instance in split.test:
        first_per_user.setdefault(instance.user_id, instance)

    # Sessions are 3 to 12 hours apart and the smallest gap is one hour
    short_lags, long_lags = [3, 4, 5], [10, 11, 12]
    short_means, long_means = [], []
    for instance in first_per_user.values():
        sweep = model.gate_sweep(instance, short_lags + long_lags)
        short_means.append(sweep[:3].mean())
        long_means.append(sweep[3:].mean())

    assert np.mean(short_means) > np.mean(long_means)


@pytest.mark.slow
def test_full_model_beats_average_fusion_and_no_short_attention(tmp_path):
    frame = lag_mixture_corpus(users=24, sessions_per_user=30, seed=0)
    split = ingest_frame(frame, tmp_path, T=T, max_delta=MAX_DELTA)
    m = split.max_session_length

    wins = 0
    for seed in range(5):
        hits = {}
        for variant in ('full', 'G+A', '-S'):
            result = train(split, model_config(variant, m), train_config(seed, epochs=15), show_progress=False)
            report = evaluate_checkpoint(result.checkpoint, split, 'test', ks=[20])
            hits[variant] = report.value('hit', 20)
        wins += hits['full'] >= hits['G+A'] and hits['full'] >= hits['-S']

    assert wins >= 4


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-m", "slow"]))
