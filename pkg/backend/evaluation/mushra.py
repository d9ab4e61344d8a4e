"""
MUSHRA listening-test score analysis.

Input CSV: listener,system,sentence,score[,speaker]  (integer scores 0..100)
Outputs:
- per-system summary: mean, std, n, 95% confidence interval (Student t)
- pairwise rank-sum table: U, p, significant at 0.05
"""

import itertools
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
from scipy.stats import t as student_t

from backend.src.core.errors import FormatError
from backend.src.utils.data_utils import load_csv_file, write_tsv
from .ranksum import RanksumResult, ranksum_test

logger = logging.getLogger(__name__)

REQUIRED_COLUMNS = ("listener", "system", "sentence", "score")


@dataclass(frozen=True)
class MushraRating:
    listener: str
    system: str
    sentence: str
    score: int
    speaker: Optional[str] = None


@dataclass(frozen=True)
class SystemSummary:
    system: str
    mean: float
    std: float
    n: int
    ci_low: float
    ci_high: float


@dataclass(frozen=True)
class PairComparison:
    system_a: str
    system_b: str
    result: RanksumResult


def _parse_score(raw: str, line: int) -> int:
    try:
        value = float(raw)
    except (TypeError, ValueError):
        raise FormatError(f"Row {line}: score {raw!r} is not a number", code="invalid-scores") from None
    if value != int(value) or not 0 <= value <= 100:
        raise FormatError(f"Row {line}: score {raw!r} must be an integer in [0, 100]", code="invalid-scores")
    return int(value)


def load_scores(path: Path | str, speaker: Optional[str] = None) -> List[MushraRating]:
    """Read and validate a score CSV; optionally keep one speaker only."""
    rows = load_csv_file(path)
    if not rows:
        raise FormatError(f"{path}: no ratings", code="invalid-scores")
    missing = [c for c in REQUIRED_COLUMNS if c not in rows[0]]
    if missing:
        raise FormatError(f"{path}: missing columns {missing}", code="invalid-scores")

    ratings = []
    for line, row in enumerate(rows, start=2):
        ratings.append(
            MushraRating(
                listener=row["listener"].strip(),
                system=row["system"].strip(),
                sentence=row["sentence"].strip(),
                score=_parse_score(row["score"], line),
                speaker=(row.get("speaker") or "").strip() or None,
            )
        )
    if speaker is not None:
        ratings = [r for r in ratings if r.speaker == speaker]
        if not ratings:
            raise FormatError(f"{path}: no ratings for speaker {speaker!r}", code="invalid-scores")
    logger.info("Loaded %d ratings from %s", len(ratings), path)
    return ratings


def scores_by_system(ratings: List[MushraRating]) -> Dict[str, np.ndarray]:
    grouped: Dict[str, List[int]] = {}
    for r in ratings:
        grouped.setdefault(r.system, []).append(r.score)
    return {system: np.asarray(v, dtype=np.float64) for system, v in sorted(grouped.items())}


def summarize(ratings: List[MushraRating], confidence: float = 0.95) -> List[SystemSummary]:
    out = []
    for system, scores in scores_by_system(ratings).items():
        n = scores.size
        mean = float(scores.mean())
        std = float(scores.std(ddof=1)) if n > 1 else 0.0
        half = float(student_t.ppf(0.5 + confidence / 2.0, n - 1) * std / np.sqrt(n)) if n > 1 else 0.0
        out.append(SystemSummary(system, mean, std, n, mean - half, mean + half))
    return out


def pairwise_tests(ratings: List[MushraRating]) -> List[PairComparison]:
    grouped = scores_by_system(ratings)
    return [
        PairComparison(a, b, ranksum_test(grouped[a], grouped[b]))
        for a, b in itertools.combinations(grouped, 2)
    ]


def write_summary(summaries: List[SystemSummary], path: Path | str) -> Path:
    rows = [(s.system, s.mean, s.std, s.n, s.ci_low, s.ci_high) for s in summaries]
    return write_tsv(path, ("system", "mean", "std", "n", "ci95_low", "ci95_high"), rows)


def write_pairwise(comparisons: List[PairComparison], path: Path | str) -> Path:
    rows = [
        (c.system_a, c.system_b, c.result.u, c.result.p_value, c.result.method, int(c.result.significant))
        for c in comparisons
    ]
    return write_tsv(path, ("system_a", "system_b", "u", "p_value", "method", "significant"), rows)
