# splitting.py

"""
Deterministic train / validation / test partitioning.

Algorithm (stable across platforms):
1. Sort the utterance identifiers lexicographically.
2. Shuffle with numpy's PCG64 bit generator seeded by ``seed``
   (``Generator(PCG64(seed)).permutation``).
3. Partition sizes come from largest-remainder rounding of n * ratios
   (ties broken in train, val, test order); every partition keeps at
   least one utterance.
4. The first ``n_train`` shuffled ids form the training set, the next
   ``n_val`` the validation set, the rest the test set.

Manifest format: one ``<id>\t<train|val|test>`` line per utterance.
"""

import logging
from fractions import Fraction
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np

from backend.src.core.errors import FormatError, SignalError

logger = logging.getLogger(__name__)

SPLIT_RATIOS: Tuple[float, float, float] = (0.85, 0.10, 0.05)
PARTITIONS = ("train", "val", "test")
MIN_UTTERANCES = 3


@dataclass(frozen=True)
class DatasetSplit:
    train: Tuple[str, ...]
    validation: Tuple[str, ...]
    test: Tuple[str, ...]

    def __post_init__(self) -> None:
        seen = set()
        for part in (self.train, self.validation, self.test):
            overlap = seen.intersection(part)
            if overlap:
                raise SignalError(f"Split partitions overlap: {sorted(overlap)}")
            seen.update(part)

    def as_dict(self) -> Dict[str, Tuple[str, ...]]:
        return {"train": self.train, "val": self.validation, "test": self.test}

    def all_ids(self) -> List[str]:
        return [*self.train, *self.validation, *self.test]


def largest_remainder_sizes(n: int, ratios: Sequence[float] = SPLIT_RATIOS) -> List[int]:
    # exact rational arithmetic so 20 * 0.85 is 17, not 16.999...
    weights = [Fraction(r).limit_denominator(10**6) for r in ratios]
    total = sum(weights)
    quotas = [n * w / total for w in weights]
    sizes = [int(q) for q in quotas]
    leftover = n - sum(sizes)
    order = sorted(range(len(ratios)), key=lambda i: (-(quotas[i] - sizes[i]), i))
    for i in order[:leftover]:
        sizes[i] += 1

    # keep every partition non-empty, borrowing from the largest one
    for i, size in enumerate(sizes):
        if size == 0:
            donor = max(range(len(sizes)), key=lambda j: sizes[j])
            sizes[donor] -= 1
            sizes[i] = 1
    return sizes


def split_dataset(
    utterance_ids: Sequence[str],
    seed: int,
    ratios: Sequence[float] = SPLIT_RATIOS,
) -> DatasetSplit:
    ids = sorted(set(utterance_ids))
    if len(ids) != len(utterance_ids):
        logger.warning("Dropped %d duplicate utterance ids", len(utterance_ids) - len(ids))
    if len(ids) < MIN_UTTERANCES:
        raise SignalError(
            f"Need at least {MIN_UTTERANCES} utterances to split, got {len(ids)}",
            code="too-few-utterances",
        )

    rng = np.random.Generator(np.random.PCG64(seed))
    order = rng.permutation(len(ids))
    shuffled = [ids[i] for i in order]

    n_train, n_val, _ = largest_remainder_sizes(len(ids), ratios)
    split = DatasetSplit(
        train=tuple(shuffled[:n_train]),
        validation=tuple(shuffled[n_train:n_train + n_val]),
        test=tuple(shuffled[n_train + n_val:]),
    )
    logger.info(
        "Split %d utterances -> train=%d val=%d test=%d (seed=%d)",
        len(ids), len(split.train), len(split.validation), len(split.test), seed,
    )
    return split


def write_split_manifest(split: DatasetSplit, path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{utt}\t{name}\n" for name, ids in split.as_dict().items() for utt in ids]
    path.write_text("".join(lines), encoding="utf-8")
    return path


def read_split_manifest(path: Path | str) -> DatasetSplit:
    path = Path(path)
    if not path.exists():
        raise FormatError(f"Split manifest not found: {path}", code="stage-dependency")

    parts: Dict[str, List[str]] = {name: [] for name in PARTITIONS}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 2 or fields[1] not in parts:
            raise FormatError(f"{path}:{lineno}: expected '<id>\\t<train|val|test>'")
        parts[fields[1]].append(fields[0])

    return DatasetSplit(
        train=tuple(parts["train"]),
        validation=tuple(parts["val"]),
        test=tuple(parts["test"]),
    )
