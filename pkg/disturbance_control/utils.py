"""
Utility functions for experiment outputs: CSV files, hashing, seeding and tables.
"""

import csv
import hashlib
import json
import logging
import os
import uuid
from typing import Any, Dict, Iterable, List, Sequence, Tuple

import numpy as np

from disturbance_control.errors import InvalidArgumentError, MissingArtifactError

PACKAGE_LOGGER = "disturbance_control"


def get_logger(name: str) -> logging.Logger:
    """Logger below the package logger, where ExperimentManager attaches its handlers."""
    return logging.getLogger(f"{PACKAGE_LOGGER}.{name}")


logger = get_logger("DpcUtils")


def ensure_directory(path: str) -> str:
    """
    Create a directory (and parents) if it does not exist.

    Args:
        path: Directory path

    Returns:
        The same path
    """
    if path and not os.path.exists(path):
        os.makedirs(path)
    return path


def format_value(value: Any) -> str:
    """
    Format a CSV cell so that re-running a command yields identical bytes.

    Args:
        value: Number, bool or string

    Returns:
        String representation (floats use repr for round-trip precision)
    """
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> int:
    """
    Write rows to a CSV file with a header line.

    Args:
        path: Output file path
        header: Column names
        rows: Row values, formatted with format_value

    Returns:
        Number of data rows written
    """
    ensure_directory(os.path.dirname(path))
    count = 0
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise InvalidArgumentError(f"Row has {len(row)} values, header has {len(header)}")
            writer.writerow([format_value(v) for v in row])
            count += 1
    logger.debug(f"Wrote {count} rows to {path}")
    return count


def read_csv(path: str) -> Tuple[List[str], List[List[str]]]:
    """
    Read a CSV file written by write_csv.

    Args:
        path: CSV file path

    Returns:
        Tuple of (header, rows as string lists)
    """
    if not os.path.exists(path):
        raise MissingArtifactError(f"File not found: {path}")
    with open(path, "r", newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            return [], []
        return header, [row for row in reader]


def write_json(path: str, data: Dict[str, Any]) -> None:
    """Write a dictionary as indented JSON with sorted keys."""
    ensure_directory(os.path.dirname(path))
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, ensure_ascii=False, indent=2, sort_keys=True)
        f.write("\n")


def tensor_digest(tensors: Dict[str, np.ndarray]) -> str:
    """
    SHA-256 over tensor names, shapes and raw float64 bytes.

    Args:
        tensors: Mapping of name to array

    Returns:
        Hex digest
    """
    digest = hashlib.sha256()
    for name in sorted(tensors):
        array = np.ascontiguousarray(tensors[name], dtype="<f8")
        digest.update(name.encode("utf-8"))
        digest.update(str(array.shape).encode("ascii"))
        digest.update(array.tobytes())
    return digest.hexdigest()


def file_digest(path: str) -> str:
    """SHA-256 of a file's bytes."""
    if not os.path.exists(path):
        raise MissingArtifactError(f"File not found: {path}")
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def make_rng(seed: int, *streams: Any) -> np.random.Generator:
    """
    Deterministic generator for a seed and optional named sub-streams.

    Args:
        seed: Base seed
        streams: Extra labels (task name, episode index, ...) mixed into the seed

    Returns:
        numpy Generator
    """
    entropy = [int(seed)]
    for stream in streams:
        entropy.append(int(hashlib.sha256(str(stream).encode("utf-8")).hexdigest()[:8], 16))
    return np.random.default_rng(np.random.SeedSequence(entropy))


def generate_run_id(*parts: Any) -> str:
    """
    Generate a stable run ID from its defining parts.

    Args:
        parts: Values identifying the run (command, arm, seed, ...)

    Returns:
        UUID string
    """
    text = "/".join(str(p) for p in parts)
    return str(uuid.uuid5(uuid.NAMESPACE_URL, text))


def format_table(header: Sequence[str], rows: Sequence[Sequence[Any]], precision: int = 3) -> str:
    """
    Render rows as an aligned plain-text table.

    Args:
        header: Column names
        rows: Row values
        precision: Decimal places for floats

    Returns:
        Table as a multi-line string
    """
    def cell(value: Any) -> str:
        if isinstance(value, (float, np.floating)):
            return f"{float(value):.{precision}f}"
        return str(value)

    text_rows = [[cell(v) for v in row] for row in rows]
    widths = [len(h) for h in header]
    for row in text_rows:
        widths = [max(w, len(c)) for w, c in zip(widths, row)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)),
             "  ".join("-" * w for w in widths)]
    lines.extend("  ".join(c.ljust(w) for c, w in zip(row, widths)) for row in text_rows)
    return "\n".join(lines)


def mean_and_std(values: Sequence[float]) -> Tuple[float, float, int]:
    """Mean, population standard deviation and count of a sequence."""
    if len(values) == 0:
        return float("nan"), float("nan"), 0
    array = np.asarray(values, dtype=np.float64)
    return float(array.mean()), float(array.std()), int(array.size)
