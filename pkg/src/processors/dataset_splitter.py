"""Per-user random train/validation/test partition and final padding."""
import math
from collections import defaultdict
from typing import Dict, List, Sequence, Tuple


from src.domain import DatasetSplit, IdMapping, TrainingInstance
from src.processors.instance_builder import DEFAULT_MAX_DELTA, fit_session, pad_session
from src.processors.negative_sampler import user_rng
from src.utils.logger import logger


DEFAULT_RATIOS = (0.7, 0.1, 0.2)


def split_sizes(count: int, ratios: Sequence[float] = DEFAULT_RATIOS) -> Tuple[int, int, int]:
    """
    Split ``count`` instances by largest-remainder rounding.

    Users with at least 3 instances get one in every split with a positive
    ratio; with fewer, the train split is filled first and then the test
    split, or the validation split when the test ratio is zero. A split with
    a zero ratio never receives an instance.
    """
    if count <= 0:
        return 0, 0, 0
    if count == 1:
        return 1, 0, 0
    if count == 2:
        if ratios[2] > 0:
            return 1, 0, 1
        if ratios[1] > 0:
            return 1, 1, 0
        return 2, 0, 0

    quotas = [r * count for r in ratios]
    sizes = [math.floor(q + 1e-9) for q in quotas]
    remainders = [q - s for q, s in zip(quotas, sizes)]
    order = sorted(range(3), key=lambda i: (-round(remainders[i], 9), i))
    for i in order[:max(0, count - sum(sizes))]:
        sizes[i] += 1

    for i in range(3):
        if sizes[i] == 0 and ratios[i] > 0:
            largest = max(range(3), key=lambda j: (sizes[j], -j))
            sizes[largest] -= 1
            sizes[i] += 1
    return sizes[0], sizes[1], sizes[2]


def partition_instances(instances: Sequence[TrainingInstance], ratios: Sequence[float],
                        seed: int) -> Tuple[List[TrainingInstance], List[TrainingInstance], List[TrainingInstance]]:
    """
    Randomly partition each user's instances by the ratios.

    The shuffle of user u uses the generator seeded with ``seed XOR u``, so the
    result does not depend on how users are processed.
    """
    by_user: Dict[int, List[TrainingInstance]] = defaultdict(list)
    for instance in instances:
        by_user[instance.user_id].append(instance)

    train, validation, test = [], [], []
    for user_id in sorted(by_user):
        user_instances = by_user[user_id]
        order = user_rng(seed, user_id).permutation(len(user_instances))
        shuffled = [user_instances[i] for i in order]
        n_train, n_val, _ = split_sizes(len(shuffled), ratios)
        train.extend(shuffled[:n_train])
        validation.extend(shuffled[n_train:n_train + n_val])
        test.extend(shuffled[n_train + n_val:])
    return train, validation, test


def max_input_session_length(instances: Sequence[TrainingInstance]) -> int:
    """Longest raw input session among the instances (0 if none)."""
    return max((len(s) for inst in instances for s in inst.input_sessions), default=0)


def pad_instances(instances: Sequence[TrainingInstance], m: int, truncate: bool = False) -> List[TrainingInstance]:
    """Pad every input session to m items; ``truncate`` keeps the last m of longer ones."""
    fit = fit_session if truncate else pad_session
    return [inst.with_sessions(tuple(fit(s, m) for s in inst.input_sessions)) for inst in instances]


def split_dataset(
    instances: Sequence[TrainingInstance],
    ratios: Sequence[float] = DEFAULT_RATIOS,
    seed: int = 0,
    *,
    item_count: int,
    user_count: int,
    sessions_per_instance: int,
    max_delta: int = DEFAULT_MAX_DELTA,
    threshold_seconds: int = 0,
    id_mapping: IdMapping = None
) -> DatasetSplit:
    """
    Partition instances per user and pad them to the training portion's m.

    Validation and test sessions longer than m keep their most recent m items.

    Args:
        instances: Unpadded instances of all users
        ratios: (train, validation, test) fractions summing to 1
        seed: Global seed for the per-user shuffles

    Returns:
        Padded DatasetSplit
    """
    if len(ratios) != 3 or any(r < 0 for r in ratios) or not math.isclose(sum(ratios), 1.0, abs_tol=1e-9):
        raise ValueError(f"split ratios must be three non-negative numbers summing to 1, got {ratios}")

    train, validation, test = partition_instances(instances, ratios, seed)
    m = max_input_session_length(train) or max_input_session_length(instances) or 1

    truncated = sum(1 for inst in validation + test for s in inst.input_sessions if len(s) > m)
    if truncated:
        logger.warning(f"{truncated} evaluation sessions exceed m={m} and keep their last {m} items")

    split = DatasetSplit(
        train=pad_instances(train, m),
        validation=pad_instances(validation, m, truncate=True),
        test=pad_instances(test, m, truncate=True),
        item_count=item_count,
        user_count=user_count,
        max_session_length=m,
        sessions_per_instance=sessions_per_instance,
        max_delta=max_delta,
        threshold_seconds=threshold_seconds,
        seed=seed,
        ratios=tuple(float(r) for r in ratios),
        id_mapping=id_mapping or IdMapping(),
    )
    logger.info(f"Split {len(instances)} instances into train={len(split.train)}, "
                f"validation={len(split.validation)}, test={len(split.test)} (m={m})")
    return split
