"""End-to-end tests of the command-line interface on the memorization corpus."""
import json
import sys
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

# Add project root to path
project_root = Path(__file__).parent.parent
if str(project_root) not in sys.path:
    sys.path.insert(0, str(project_root))

from src.main import main


RUN_CONFIG = """
[dataset]
path = {corpus}
threshold_seconds = 7200
sessions_per_instance = 3
max_delta = 8

[model]
d = 8
h = 2
dropout_rate = 0.0

[train]
learning_rate = 0.01
batch_size = 16
epochs = 2
lambda_reg = 0.0
validation_k = 1

[eval]
ks = 1, 5

[output]
dir = {run_dir}
log_level = WARNING
"""


@pytest.fixture
def workspace(tmp_path):
    """Synthetic corpus plus a run configuration pointing at it."""
    corpus = tmp_path / 'memorization.csv'
    assert main(['synth', '--kind', 'memorization', '--out', str(corpus)]) == 0
    run_dir = tmp_path / 'run'
    config = tmp_path / 'run.ini'
    config.write_text(RUN_CONFIG.format(corpus=corpus.as_posix(), run_dir=run_dir.as_posix()), encoding='utf-8')
    return config, run_dir


def cli(config: Path, *args: str) -> int:
    command, rest = args[0], list(args[1:])
    return main([command, '--config', str(config), *rest])


def test_synth_writes_headerless_csv(workspace):
    config, _ = workspace
    corpus = config.parent / 'memorization.csv'
    first_line = corpus.read_text(encoding='utf-8').splitlines()[0]
    assert first_line.split(',')[:2] == ['u0', 'i0']
    assert len(corpus.read_text(encoding='utf-8').splitlines()) == 120


def test_ingest_is_byte_stable(workspace):
    config, run_dir = workspace
    assert cli(config, 'ingest') == 0
    first = (run_dir / 'instances.jsonl').read_bytes()
    report = json.loads((run_dir / 'reports' / 'ingest_report.json').read_text(encoding='utf-8'))

    assert cli(config, 'ingest') == 0
    assert (run_dir / 'instances.jsonl').read_bytes() == first
    assert report['users'] == 4
    assert report['instances'] == {'train': 76, 'validation': 12, 'test': 20}
    assert report['validation']['passed']
    assert (run_dir / 'instance_header.json').is_file()
    assert (run_dir / 'config.ini').is_file()


def test_train_eval_inspect(workspace):
    config, run_dir = workspace
    assert cli(config, 'ingest') == 0
    assert cli(config, 'train', '--epochs', '0') == 0

    summary = json.loads((run_dir / 'reports' / 'train_summary.json').read_text(encoding='utf-8'))
    assert summary['best_epoch'] == 0
    assert (run_dir / 'checkpoints' / 'best.ckpt').is_file()

    assert cli(config, 'eval') == 0
    records = (run_dir / 'reports' / 'eval_test.jsonl').read_bytes()
    assert cli(config, 'eval') == 0
    assert (run_dir / 'reports' / 'eval_test.jsonl').read_bytes() == records
    assert len(records.decode('utf-8').splitlines()) == 6

    assert cli(config, 'inspect', '--user', 'u1') == 0
    inspect_dir = run_dir / 'inspect'
    attention = pd.read_csv(inspect_dir / 'attention_useru1_block0.csv')
    weights = attention[['key_1', 'key_2', 'key_3']].to_numpy()
    assert np.all(np.triu(weights, k=1) == 0.0)

    gates = pd.read_csv(inspect_dir / 'gates_useru1_delta1-8.csv')
    assert len(gates) == 8
    gate_columns = [f'g_{k}' for k in range(1, 9)]
    np.testing.assert_allclose(gates['mean'], gates[gate_columns].mean(axis=1), atol=1e-12)


def test_train_logs_every_epoch(workspace):
    config, run_dir = workspace
    assert cli(config, 'ingest') == 0
    assert cli(config, 'train', '--variant=G+A') == 0
    lines = (run_dir / 'logs' / 'epochs.jsonl').read_text(encoding='utf-8').splitlines()
    assert [json.loads(line)['epoch'] for line in lines] == [1, 2]
    summary = json.loads((run_dir / 'reports' / 'train_summary.json').read_text(encoding='utf-8'))
    assert summary['variant'] == 'gate_average'


def test_single_head_ablation_matches_full_with_one_head(workspace):
    config, run_dir = workspace
    assert cli(config, 'ingest') == 0
    assert cli(config, 'ablate', '--variants=full,-M', '--set', 'model.h=1', '--epochs', '1') == 0

    table = pd.read_csv(run_dir / 'reports' / 'ablation.csv')
    assert table['label'].tolist() == ['full', '-M']
    metric_columns = [c for c in table.columns if '@' in c]
    assert metric_columns == ['hit@1', 'map@1', 'ap@1', 'hit@5', 'map@5', 'ap@5']
    assert table.loc[0, metric_columns].tolist() == table.loc[1, metric_columns].tolist()
    assert (run_dir / 'checkpoints' / 'ablation' / 'single_head_seed0.ckpt').is_file()


def test_unknown_variant_is_a_config_error(workspace, capsys):
    config, _ = workspace
    assert cli(config, 'train', '--variant=-X') == 2
    assert 'ConfigError:' in capsys.readouterr().err


def test_missing_checkpoint(workspace, capsys):
    config, run_dir = workspace
    assert cli(config, 'ingest') == 0
    capsys.readouterr()
    assert cli(config, 'eval', '--checkpoint', str(run_dir / 'nowhere.ckpt')) == 2
    assert 'CheckpointError:' in capsys.readouterr().err


def test_inspect_rejects_lag_range_beyond_c(workspace, capsys):
    config, _ = workspace
    assert cli(config, 'ingest') == 0
    assert cli(config, 'train', '--epochs', '0') == 0
    capsys.readouterr()
    assert cli(config, 'inspect', '--set', 'inspect.delta_max=9') == 2
    assert 'ConfigError:' in capsys.readouterr().err


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
