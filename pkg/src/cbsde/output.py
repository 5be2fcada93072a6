"""Result files for experiments.

Each run writes a JSON summary and a detail table (CSV or JSON) into an
output directory. Files are written atomically and contain no timestamps, so
the same config and seed always produce byte-identical files.
"""

import csv
import hashlib
import io
import json
import math
from pathlib import Path
from typing import Any, Dict, List, Mapping, Sequence, Union

SUMMARY_FILE = "summary.json"
DETAIL_STEM = "detail"
SIGNIFICANT_DIGITS = 15


class OutputError(Exception):
    """Base exception for output errors."""

    pass


def canonical_json(data: Any) -> str:
    """Serialize with sorted keys and no whitespace."""
    return json.dumps(_plain(data), sort_keys=True, separators=(",", ":"))


def config_digest(data: Mapping[str, Any]) -> str:
    """SHA-256 of the canonical JSON of an effective config."""
    return hashlib.sha256(canonical_json(data).encode("utf-8")).hexdigest()


def format_value(value: Any) -> str:
    """Render a table cell; floats keep 15 significant digits."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return f"{value:.{SIGNIFICANT_DIGITS}g}"
    return str(value)


def _plain(value: Any) -> Any:
    """Convert tuples, numpy scalars and non-finite floats to JSON-safe values."""
    if isinstance(value, Mapping):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if hasattr(value, "item") and callable(value.item):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return value


def _write_atomic(path: Path, content: str) -> None:
    """Write to a temp file first, then rename.

    Raises:
        OutputError: If the file cannot be written.
    """
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        temp_file = path.with_suffix(path.suffix + ".tmp")
        with open(temp_file, "w", encoding="utf-8", newline="") as f:
            f.write(content)
        temp_file.replace(path)
    except OSError as e:
        raise OutputError(f"Failed to write output file '{path}': {e}")


def write_json(path: Union[str, Path], data: Any) -> Path:
    """Write a JSON document (indent 2, sorted keys, trailing newline)."""
    path = Path(path)
    _write_atomic(path, json.dumps(_plain(data), indent=2, sort_keys=True) + "\n")
    return path


def write_csv(path: Union[str, Path], columns: Sequence[str], rows: List[Sequence[Any]]) -> Path:
    """Write a CSV table with a header row."""
    path = Path(path)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        if len(row) != len(columns):
            raise OutputError(f"Row has {len(row)} cells, expected {len(columns)}")
        writer.writerow([format_value(cell) for cell in row])
    _write_atomic(path, buffer.getvalue())
    return path


class ResultWriter:
    """Writes the summary and detail table of one run into a directory."""

    def __init__(self, directory: Union[str, Path], fmt: str = "csv"):
        """Initialize the writer.

        Args:
            directory: Output directory (created on first write).
            fmt: Detail table format, "csv" or "json".

        Raises:
            OutputError: If the format is unknown.
        """
        if fmt not in ("csv", "json"):
            raise OutputError(f"Unknown output format '{fmt}'. Expected 'csv' or 'json'")
        self.directory = Path(directory)
        self.format = fmt

    def write_summary(self, summary: Mapping[str, Any]) -> Path:
        return write_json(self.directory / SUMMARY_FILE, summary)

    def write_detail(self, columns: Sequence[str], rows: List[Sequence[Any]]) -> Path:
        if self.format == "csv":
            return write_csv(self.directory / f"{DETAIL_STEM}.csv", columns, rows)
        records: List[Dict[str, Any]] = [dict(zip(columns, row)) for row in rows]
        return write_json(self.directory / f"{DETAIL_STEM}.json", records)
