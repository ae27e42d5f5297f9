"""Shared fixtures: random padded instances, tiny model configs, scalar references and ingested corpora."""
import math
import sys
from pathlib import Path

import numpy as np
import pytest

# Add project root to path
project_root = Path(__file__).parent.parent
if str(project_root) not in sys.path:
    sys.path.insert(0, str(project_root))

from src.domain import Session, TrainingInstance
from src.processors.dataset_splitter import split_dataset
from src.processors.instance_builder import InstanceBuilder
from src.processors.session_splitter import SessionSplitter, group_by_user
from src.processors.synthetic_corpus import memorization_corpus, write_corpus
from src.extractors.interaction_reader import InteractionReader
from src.recommender.config import ModelConfig


def make_instance(rng: np.random.Generator, T: int, m: int, item_count: int, user_id: int = 0,
                  delta: int = 1, targets=(1, 3)) -> TrainingInstance:
    """A padded instance with random input items."""
    sessions = tuple(
        Session(tuple(int(i) for i in rng.integers(0, item_count, size=m)), 100 * t, 100 * t + 10)
        for t in range(T)
    )
    return TrainingInstance(
        user_id=user_id,
        input_sessions=sessions,
        target_items=tuple(sorted(targets)),
        time_lag_seconds=50,
        delta_index=delta,
        target_start_ts=100 * T + 50,
    )


def tiny_config(**overrides) -> ModelConfig:
    """d=8, h=2, T=3, m=2, C=4 with dropout off unless overridden."""
    values = dict(d=8, h=2, T=3, m=2, C=4, dropout_rate=0.0)
    values.update(overrides)
    return ModelConfig(**values)


def softmax(values):
    values = np.asarray(values, dtype=np.float64)
    exp_values = np.exp(values - values.max())
    return exp_values / exp_values.sum()


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def reference_attention(Q, K, V, X, causal=False):
    """Column i: sum over keys j of softmax_j(q_i . k_j / sqrt(rows of Q)) v_j."""
    n = X.shape[1]
    dk = Q.shape[0]
    out = np.zeros((V.shape[0], n))
    for i in range(n):
        keys = range(i + 1) if causal else range(n)
        q = Q @ X[:, i]
        scores = [float(np.dot(q, K @ X[:, j])) / math.sqrt(dk) for j in keys]
        weights = softmax(scores)
        for w, j in zip(weights, keys):
            out[:, i] += w * (V @ X[:, j])
    return out


def reference_block(X, heads, O, alpha, beta, W1, b1, W2, b2, eps):
    concat = np.vstack([reference_attention(Qh, Kh, Vh, X, causal=True) for Qh, Kh, Vh in heads])
    Z = X + O @ concat
    out = np.zeros_like(X)
    for t in range(X.shape[1]):
        z = Z[:, t]
        mu = z.mean()
        var = ((z - mu) ** 2).mean()
        n = alpha * (z - mu) / math.sqrt(var + eps) + beta
        hidden = np.maximum(W1 @ n + b1, 0.0)
        out[:, t] = W2 @ hidden + b2
    return out


def ingest_frame(frame, tmp_path: Path, T: int, threshold: int = 7200, max_delta: int = 128, seed: int = 0):
    """Run the ingestion steps on a corpus DataFrame and return the split."""
    path = write_corpus(frame, tmp_path / 'corpus.csv')
    interactions, mapping = InteractionReader().read_file(path)
    grouped = group_by_user(interactions)
    sessions = SessionSplitter(threshold).split_all(grouped)
    windows = InstanceBuilder(T, max_delta).build_all(sessions, grouped)
    return split_dataset(
        windows.instances, (0.7, 0.1, 0.2), seed,
        item_count=mapping.item_count,
        user_count=mapping.user_count,
        sessions_per_instance=T,
        max_delta=max_delta,
        threshold_seconds=threshold,
        id_mapping=mapping,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def memorization_split(tmp_path):
    """The 4-user cyclic corpus windowed with T=3."""
    return ingest_frame(memorization_corpus(), tmp_path, T=3, max_delta=8)
