"""
Deterministic writers for the package's file formats. Every writer produces byte-identical output
for identical input, which the command-line goldens rely on.
"""

import json
import math
from collections.abc import Iterable, Mapping
from pathlib import Path
from typing import IO, Any

import numpy as np

from ..base import Exceptions


def to_jsonable(obj: Any) -> Any:
    """
    Recursively converts numpy scalars and arrays (and tuples) into plain Python objects that
    `json` can serialize. Non-finite floats are rejected, since JSON has no spelling for them.
    """

    if isinstance(obj, Mapping):
        return {str(key): to_jsonable(value) for key, value in obj.items()}
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(item) for item in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if not math.isfinite(value):
            raise Exceptions.NonFiniteValue(f"cannot serialize non-finite number {value}")
        return value
    return obj


def dumps(obj: Any, indent: int | None = None) -> str:
    """
    Serializes to JSON, keeping key insertion order. Floats use Python's shortest
    round-trip representation, so `float(text)` reproduces each value exactly.
    """
    return json.dumps(to_jsonable(obj), indent=indent, allow_nan=False)


def write_json(obj: Any, path: str | Path):
    Path(path).write_text(dumps(obj, indent=2) + "\n", encoding="utf-8")


class JsonlWriter:
    """
    Writes one JSON document per line and flushes after each, so that a reader (or a crash)
    sees every record written so far. Use as a context manager.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._file: IO[str] | None = None

    def __enter__(self) -> "JsonlWriter":
        self._file = open(self.path, "w", encoding="utf-8")
        return self

    def write(self, record: Mapping[str, Any]):
        if self._file is None:
            raise Exceptions.DiscganError(f"'{self.path}' is not open for writing")
        self._file.write(dumps(record) + "\n")
        self._file.flush()

    def __exit__(self, *exc_info):
        if self._file is not None:
            self._file.close()
            self._file = None


def write_jsonl(records: Iterable[Mapping[str, Any]], path: str | Path):
    with JsonlWriter(path) as writer:
        for record in records:
            writer.write(record)


def format_float(value: float) -> str:
    """17 significant digits, enough to round-trip any double."""
    return f"{float(value):.17g}"


def write_xy_csv(points: Iterable[tuple[float, float]], path: str | Path):
    """Writes plot data as a two-column CSV with an `x,y` header."""
    with open(path, "w", encoding="utf-8") as file:
        file.write("x,y\n")
        for x, y in points:
            file.write(f"{format_float(x)},{format_float(y)}\n")
