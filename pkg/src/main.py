"""Command-line entry point wiring ingestion, training, evaluation, ablation and inspection."""
import argparse
import math
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from tqdm import tqdm

# Add project root to path if running from src directory
_project_root = Path(__file__).parent.parent
if str(_project_root) not in sys.path:
    sys.path.insert(0, str(_project_root))

from src.utils.logger import logger, setup_logger
from src.config.settings import Settings
from src.config.run_config import RunConfig, load_run_config, variant_list
from src.domain import DatasetSplit
from src.errors import ConfigError, ContractError, TLSRecError
from src.evaluation.evaluator import evaluate_checkpoint
from src.evaluation.inspection import export_inspection, select_instance, user_label
from src.exporters.csv_writer import CSVWriter
from src.exporters.instance_file import InstanceFileWriter
from src.exporters.report_writer import JsonlAppender, write_json, write_jsonl, write_ranking_report
from src.extractors.instance_file import read_instance_file
from src.extractors.interaction_reader import InteractionReader
from src.processors.dataset_splitter import split_dataset
from src.processors.dataset_statistics import dataset_statistics
from src.processors.instance_builder import InstanceBuilder
from src.processors.session_splitter import SessionSplitter, group_by_user, suggest_session_threshold
from src.processors.synthetic_corpus import lag_mixture_corpus, memorization_corpus, write_corpus
from src.recommender.checkpoint import load_checkpoint, save_checkpoint
from src.recommender.config import VARIANT_LABELS, Variant
from src.training.trainer import Trainer
from src.validators.split_validator import SplitValidator


COMMANDS = ('ingest', 'train', 'eval', 'ablate', 'inspect', 'synth')

INSTANCE_FILE = 'instances.jsonl'
HEADER_ECHO = 'instance_header.json'
CONFIG_SNAPSHOT = 'config.ini'
BEST_CHECKPOINT = Path('checkpoints') / 'best.ckpt'


def _banner(title: str):
    logger.info("\n" + "=" * 80)
    logger.info(title)
    logger.info("=" * 80)


class TLSRecPipeline:
    """
    Run directory driven by one RunConfig.

    Layout under ``output.dir``:
    - config.ini: effective configuration of the last command
    - instances.jsonl, instance_header.json: ingested dataset
    - checkpoints/: best.ckpt and per-run ablation checkpoints
    - logs/: run.log and epochs.jsonl
    - reports/: ingest, evaluation and ablation reports
    - inspect/: attention and gate CSVs
    """

    def __init__(self, config: RunConfig):
        """
        Initialize pipeline.

        Args:
            config: Validated run configuration
        """
        self.config = config
        self.output_dir = Path(config.output_dir)
        self.reports_dir = self.output_dir / 'reports'
        self.logs_dir = self.output_dir / 'logs'
        self.instance_file = self.output_dir / INSTANCE_FILE

        self.output_dir.mkdir(parents=True, exist_ok=True)
        setup_logger('TLSRec', self.logs_dir / 'run.log', config.output.log_level)
        (self.output_dir / CONFIG_SNAPSHOT).write_text(config.to_ini(), encoding=Settings.OUTPUT_ENCODING)

        logger.info("=" * 80)
        logger.info("TLSRec run initialized")
        logger.info(f"Output: {self.output_dir}")
        logger.info(f"Variant: {config.model.variant.value}, seed: {config.train.seed}")
        logger.info("=" * 80)

    def ingest(self) -> Dict:
        """
        Turn the raw interaction log into the instance file.

        Returns:
            Ingest report (corpus statistics plus the validation summary)

        Raises:
            ConfigError: If no dataset path is configured
            ContractError: If the resulting split fails validation
        """
        dataset = self.config.dataset
        if dataset.path is None:
            raise ConfigError("[dataset] path is required for ingest")

        _banner("PHASE 1: READ INTERACTIONS")
        logger.info(f"Step 1.1: Parsing {dataset.path}")
        interactions, mapping = InteractionReader(dataset.format_descriptor()).read_file(dataset.path)

        logger.info("Step 1.2: Grouping interactions per user")
        grouped = group_by_user(interactions)

        _banner("PHASE 2: SESSIONS AND INSTANCES")
        logger.info("Step 2.1: Choosing the session threshold")
        suggested = suggest_session_threshold(grouped, coverage=dataset.threshold_coverage)
        threshold = suggested if dataset.threshold_seconds == 'auto' else dataset.threshold_seconds
        logger.info(f"Session threshold {threshold}s (suggested {suggested}s)")

        logger.info("Step 2.2: Splitting sessions")
        sessions = SessionSplitter(threshold).split_all(grouped)

        logger.info("Step 2.3: Windowing instances")
        windows = InstanceBuilder(dataset.sessions_per_instance, dataset.max_delta).build_all(sessions, grouped)

        logger.info("Step 2.4: Splitting train/validation/test")
        split = split_dataset(
            windows.instances, dataset.split_ratios, dataset.seed,
            item_count=mapping.item_count,
            user_count=mapping.user_count,
            sessions_per_instance=dataset.sessions_per_instance,
            max_delta=dataset.max_delta,
            threshold_seconds=threshold,
            id_mapping=mapping,
        )

        _banner("PHASE 3: VALIDATION & EXPORT")
        logger.info("Step 3.1: Validating the split")
        validation = SplitValidator().validate_all(split)
        report = dataset_statistics(interactions, sessions, split, len(windows.skipped_users), threshold)
        report['suggested_threshold_seconds'] = suggested
        report['validation'] = {
            'passed': validation['passed'],
            'errors': validation['errors'],
            'warnings': validation['warnings'],
            'statistics': validation['statistics'],
        }
        write_json(report, self.reports_dir / 'ingest_report.json')

        if not validation['passed']:
            for error in validation['errors'][:10]:
                logger.error(f"  - {error}")
            raise ContractError(f"ingested split failed validation with {len(validation['errors'])} errors; "
                                f"see {self.reports_dir / 'ingest_report.json'}")

        logger.info("Step 3.2: Writing the instance file")
        writer = InstanceFileWriter()
        writer.write(split, self.instance_file)
        writer.write_header_echo(split, self.output_dir / HEADER_ECHO)

        logger.info(f"Users: {report['users']}, items: {report['items']}, sessions: {report['sessions']}, "
                    f"avg session length: {report['avg_session_length']}, density: {report['density']}")
        return report

    def load_split(self, filepath: Optional[Path] = None) -> DatasetSplit:
        """Read the run's instance file (or ``filepath``)."""
        return read_instance_file(filepath or self.instance_file)

    def _model_config(self, split: DatasetSplit, variant: Optional[Variant] = None):
        return self.config.model.to_model_config(
            split.sessions_per_instance, split.max_session_length, split.max_delta, variant
        )

    def train(self, split: Optional[DatasetSplit] = None) -> Dict:
        """
        Train the configured variant and save the best checkpoint.

        Returns:
            Training summary (best epoch, best validation metric, checkpoint path)
        """
        _banner("PHASE 1: LOAD INSTANCES")
        split = split or self.load_split()
        model_config = self._model_config(split)

        _banner("PHASE 2: TRAINING")
        epoch_log = JsonlAppender(self.logs_dir / 'epochs.jsonl')
        result = Trainer(model_config, self.config.train, split, epoch_callback=epoch_log).train()

        _banner("PHASE 3: CHECKPOINT")
        path = save_checkpoint(result.checkpoint, self.output_dir / BEST_CHECKPOINT)
        summary = {
            'variant': model_config.variant.value,
            'best_epoch': result.best_epoch,
            'best_metric': result.best_metric,
            'epochs_run': len(result.history),
            'parameters': result.checkpoint.params.count(),
            'checkpoint': BEST_CHECKPOINT.as_posix(),
        }
        write_json(summary, self.reports_dir / 'train_summary.json')
        logger.info(f"Saved checkpoint to {path}")
        return summary

    def evaluate(self, checkpoint_path: Optional[Path] = None, portion: Optional[str] = None) -> Dict:
        """
        Evaluate a checkpoint and write ``reports/eval_<portion>.jsonl`` and ``.txt``.

        Returns:
            Flat metric dictionary such as {'hit@20': ..., 'map@20': ...}
        """
        eval_config = self.config.eval
        portion = portion or eval_config.portion

        _banner("PHASE 1: LOAD CHECKPOINT AND INSTANCES")
        checkpoint = load_checkpoint(checkpoint_path or self.output_dir / BEST_CHECKPOINT)
        split = self.load_split()

        _banner("PHASE 2: RANKING EVALUATION")
        report = evaluate_checkpoint(checkpoint, split, portion, eval_config.ks,
                                     eval_config.exclude_history, eval_config.workers)
        write_ranking_report(report, self.reports_dir, f"eval_{portion}")
        logger.info("\n" + report.table())
        return report.flat()

    def ablate(self, variants: Optional[Sequence[Variant]] = None) -> List[Dict]:
        """
        Train and evaluate every requested variant, averaging over repeats.

        Run r of every variant uses seed ``train.seed + r``, so all variants
        see the same initialization seeds, shuffles and negatives.

        Returns:
            One row per variant with the averaged metrics
        """
        ablate_config, eval_config = self.config.ablate, self.config.eval
        variants = list(variants or ablate_config.variants)

        _banner("PHASE 1: LOAD INSTANCES")
        split = self.load_split()

        _banner("PHASE 2: VARIANT SWEEP")
        rows, run_records = [], []
        for variant in tqdm(variants, desc="Variants", disable=not Settings.SHOW_PROGRESS):
            model_config = self._model_config(split, variant)
            runs: List[Dict[str, float]] = []
            for repeat in range(ablate_config.repeats):
                seed = self.config.train.seed + repeat
                logger.info(f"Step 2.{len(rows) + 1}: {VARIANT_LABELS[variant]} run {repeat + 1}/{ablate_config.repeats} "
                            f"(seed {seed})")
                train_config = self.config.train.model_copy(update={'seed': seed})
                result = Trainer(model_config, train_config, split, show_progress=False).train()
                save_checkpoint(result.checkpoint,
                                self.output_dir / 'checkpoints' / 'ablation' / f"{variant.value}_seed{seed}.ckpt")
                report = evaluate_checkpoint(result.checkpoint, split, eval_config.portion, eval_config.ks,
                                             eval_config.exclude_history, eval_config.workers)
                flat = report.flat()
                runs.append(flat)
                run_records.append({'variant': variant.value, 'seed': seed, 'best_epoch': result.best_epoch, **flat})

            averaged = {key: math.fsum(run[key] for run in runs) / len(runs) for key in runs[0]}
            rows.append({'variant': variant.value, 'label': VARIANT_LABELS[variant], 'runs': len(runs), **averaged})

        _banner("PHASE 3: ABLATION TABLE")
        CSVWriter(self.reports_dir).write_ablation_table(rows)
        write_jsonl(run_records, self.reports_dir / 'ablation_runs.jsonl')
        for row in rows:
            logger.info(f"{row['label']:<12} " + ' '.join(
                f"{key}={value:.4f}" for key, value in row.items() if '@' in key))
        return rows

    def inspect(self, checkpoint_path: Optional[Path] = None, portion: Optional[str] = None,
                user: Optional[str] = None, index: Optional[int] = None) -> Dict[str, Path]:
        """
        Export the session attention and the gate sweep of one instance.

        Raises:
            SelectorError: If the selector matches no instance
            ConfigError: If the lag range falls outside 1..C
        """
        inspect_config = self.config.inspect

        _banner("PHASE 1: LOAD CHECKPOINT AND INSTANCES")
        checkpoint = load_checkpoint(checkpoint_path or self.output_dir / BEST_CHECKPOINT)
        split = self.load_split()

        C = checkpoint.config.C
        delta_max = inspect_config.delta_max or C
        if not 1 <= inspect_config.delta_min <= delta_max <= C:
            raise ConfigError(f"inspect lag range {inspect_config.delta_min}..{delta_max} must lie within 1..{C}")

        _banner("PHASE 2: INSPECTION EXPORT")
        instance = select_instance(
            split,
            portion or inspect_config.portion,
            user if user is not None else inspect_config.user,
            inspect_config.index if index is None else index,
        )
        return export_inspection(
            checkpoint.model(), instance, self.output_dir / 'inspect',
            deltas=range(inspect_config.delta_min, delta_max + 1),
            label=user_label(split, instance.user_id),
        )


def synthesize(kind: str, out: Path, seed: int = 0) -> Path:
    """Write one of the synthetic corpora as a headerless user,item,timestamp CSV."""
    if kind == 'memorization':
        frame = memorization_corpus()
    elif kind == 'lag_mixture':
        frame = lag_mixture_corpus(seed=seed)
    else:
        raise ConfigError(f"unknown corpus kind {kind!r}; valid kinds: memorization, lag_mixture")
    return write_corpus(frame, out)


def _overrides(args: argparse.Namespace) -> List[str]:
    overrides = list(args.set or [])
    if args.seed is not None:
        overrides += [f"train.seed={args.seed}", f"dataset.seed={args.seed}"]
    if getattr(args, 'epochs', None) is not None:
        overrides.append(f"train.epochs={args.epochs}")
    if getattr(args, 'variant', None) is not None:
        overrides.append(f"model.variant={args.variant}")
    if args.output_dir is not None:
        overrides.append(f"output.dir={args.output_dir.resolve()}")
    if args.log_level is not None:
        overrides.append(f"output.log_level={args.log_level}")
    return overrides


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one sub-command per pipeline stage."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=Path, help="INI run configuration (see docs/CONFIG.md)")
    common.add_argument('--set', action='append', metavar='SECTION.KEY=VALUE',
                        help="Override a config value (repeatable)")
    common.add_argument('--seed', type=int, help="Seed for splitting and training")
    common.add_argument('--output-dir', type=Path, help=f"Run directory (default: {Settings.DEFAULT_OUTPUT_DIR})")
    common.add_argument('--log-level', help="DEBUG, INFO, WARNING or ERROR")

    checkpoint = argparse.ArgumentParser(add_help=False)
    checkpoint.add_argument('--checkpoint', type=Path, help="Checkpoint file (default: <output>/checkpoints/best.ckpt)")
    checkpoint.add_argument('--split', choices=DatasetSplit.PORTIONS, help="Portion of the instance file to use")

    parser = argparse.ArgumentParser(description="TLSRec time-lag sensitive sequential recommender")
    commands = parser.add_subparsers(dest='command', required=True)

    commands.add_parser('ingest', parents=[common], help="Raw log to instance file")

    train = commands.add_parser('train', parents=[common], help="Train one variant")
    train.add_argument('--epochs', type=int, help="Maximum number of epochs")
    train.add_argument('--variant', help="full, -S, -L, -M, G+A, G+S or G+M (write --variant=-S for dash names)")

    commands.add_parser('eval', parents=[common, checkpoint], help="Hit@k and MAP@k of a checkpoint")

    ablate = commands.add_parser('ablate', parents=[common], help="Compare variants")
    ablate.add_argument('--epochs', type=int, help="Maximum number of epochs per run")
    ablate.add_argument('--variants', help="Comma-separated variant names, e.g. --variants=full,-M (default: [ablate] variants)")

    inspect = commands.add_parser('inspect', parents=[common, checkpoint], help="Attention and gate CSVs")
    inspect.add_argument('--user', help="Raw user id (or dense index) to inspect")
    inspect.add_argument('--index', type=int, help="Which of the user's instances to inspect")

    synth = commands.add_parser('synth', parents=[common], help="Write a synthetic interaction log")
    synth.add_argument('--kind', choices=('memorization', 'lag_mixture'), required=True)
    synth.add_argument('--out', type=Path, required=True, help="Destination CSV")

    return parser


def run(args: argparse.Namespace):
    """Dispatch a parsed command line."""
    if args.command == 'synth':
        return synthesize(args.kind, args.out, args.seed or 0)

    config = load_run_config(args.config, _overrides(args))
    pipeline = TLSRecPipeline(config)

    if args.command == 'ingest':
        return pipeline.ingest()
    if args.command == 'train':
        return pipeline.train()
    if args.command == 'eval':
        return pipeline.evaluate(args.checkpoint, args.split)
    if args.command == 'ablate':
        variants = variant_list(args.variants) if args.variants else None
        return pipeline.ablate(variants)
    if args.command == 'inspect':
        return pipeline.inspect(args.checkpoint, args.split, args.user, args.index)
    raise ConfigError(f"unknown command {args.command!r}; valid commands: {', '.join(COMMANDS)}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point for command-line usage; returns the exit code."""
    args = build_parser().parse_args(argv)

    try:
        run(args)
    except TLSRecError as e:
        logger.debug(f"{e.error_class}: {e}", exc_info=True)
        print(f"{e.error_class}: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        logger.error(f"Command {args.command} failed: {e}", exc_info=True)
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return 1

    logger.info("\n" + "=" * 80)
    logger.info(f"{args.command.upper()} COMPLETED SUCCESSFULLY")
    logger.info("=" * 80)
    return 0


if __name__ == "__main__":
    sys.exit(main())
