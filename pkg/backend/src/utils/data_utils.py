from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence
import csv
import json
import logging

from ..core.errors import FormatError

logger = logging.getLogger(__name__)


def load_csv_file(path: Path | str, encoding: str = "utf-8") -> List[Dict[str, str]]:
    """
    Load a CSV file and return a list of dict rows (uses header row as keys).
    """
    path = Path(path)
    if not path.exists():
        raise FormatError(f"CSV file not found: {path}", code="stage-dependency")

    try:
        with path.open("r", encoding=encoding, newline="") as fh:
            reader = csv.DictReader(fh)
            rows = [dict(row) for row in reader]
    except (OSError, csv.Error) as e:
        raise FormatError(f"Failed to read CSV {path}: {e}") from e

    logger.debug("Loaded %d rows from %s", len(rows), path)
    return rows


def load_json_file(path: Path | str, encoding: str = "utf-8") -> Any:
    """
    Load and parse a JSON file.
    """
    path = Path(path)
    if not path.exists():
        raise FormatError(f"JSON file not found: {path}", code="stage-dependency")

    try:
        with path.open("r", encoding=encoding) as fh:
            return json.load(fh)
    except json.JSONDecodeError as jde:
        raise FormatError(f"JSON decode error for {path}: {jde}") from jde


def write_tsv(
    path: Path | str,
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
    float_format: str = "{:.6f}",
) -> Path:
    """
    Write rows as tab-separated text with a header line.

    Floats are rendered with a fixed format so reruns produce identical files.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    def fmt(value: Any) -> str:
        if isinstance(value, float):
            return float_format.format(value)
        return str(value)

    count = 0
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join(fmt(v) for v in row) + "\n")
            count += 1

    logger.info("Wrote %d rows -> %s", count, path)
    return path


def read_tsv(path: Path | str) -> List[Dict[str, str]]:
    """Read a TSV written by write_tsv back into dict rows."""
    path = Path(path)
    if not path.exists():
        raise FormatError(f"TSV file not found: {path}", code="stage-dependency")
    with path.open("r", encoding="utf-8", newline="") as fh:
        return [dict(row) for row in csv.DictReader(fh, delimiter="\t")]
