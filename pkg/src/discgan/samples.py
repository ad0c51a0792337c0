"""
Sample matrices and the CSV sample-file format.

A sample file is plain CSV: comma-separated, no header, one sample per row, decimal floats.
"""

import csv
import math
from pathlib import Path
from typing import Any

import numpy as np

from .base import Exceptions, Types
from .util import Log
from .util.serialization import format_float
from .util.typing import as_float_matrix

# Slack for rows that lie on the unit sphere up to rounding.
UNIT_BALL_SLACK = 1e-12


class SampleMatrix:
    """
    An immutable n-by-d matrix of samples, one sample per row.

    Rows must be finite. If `unit_ball` is set, every row must also satisfy ||x||_2 <= 1, which is
    the input domain the discrepancy bounds assume. The check is optional because externally
    computed embeddings are generally unbounded.
    """

    _data: Types.Array
    unit_ball: bool

    def __init__(self, data: Any, unit_ball: bool = False):
        array = as_float_matrix(data, name="sample matrix").copy()
        if array.shape[0] == 0:
            raise Exceptions.EmptySample()
        if array.shape[1] == 0:
            raise Exceptions.DimensionMismatch("sample matrix has no columns")
        if not np.all(np.isfinite(array)):
            row = int(np.argmax(~np.all(np.isfinite(array), axis=1)))
            raise Exceptions.NonFiniteValue(f"sample row {row} has non-finite entries")
        if unit_ball:
            norms = np.linalg.norm(array, axis=1)
            if np.any(norms > 1 + UNIT_BALL_SLACK):
                row = int(np.argmax(norms))
                raise Exceptions.UnitBallViolation(
                    f"sample row {row} has norm {norms[row]:.6g} > 1",
                )
        array.setflags(write=False)
        self._data = array
        self.unit_ball = unit_ball

    @classmethod
    def coerce(cls, obj: Any) -> "SampleMatrix":
        """Returns `obj` if it already is a sample matrix, otherwise wraps it without the check."""
        if isinstance(obj, SampleMatrix):
            return obj
        return cls(obj)

    @property
    def data(self) -> Types.Array:
        return self._data

    @property
    def rows(self) -> int:
        return self._data.shape[0]

    @property
    def cols(self) -> int:
        return self._data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    def scaled(self, factor: float) -> "SampleMatrix":
        return SampleMatrix(self._data * factor, unit_ball=self.unit_ball and abs(factor) <= 1)

    def __len__(self):
        return self.rows

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._data
        return self._data.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, SampleMatrix):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self._data, other._data))

    __hash__ = None  # type: ignore

    def __repr__(self):
        return f"{self.__class__.__name__}({self.rows}x{self.cols})"


def check_same_dim(*matrices: SampleMatrix):
    dims = {matrix.cols for matrix in matrices}
    if len(dims) > 1:
        raise Exceptions.DimensionMismatch(f"sample matrices have differing dimensions {dims}")
    return dims.pop()


def load_samples(
    path: str | Path,
    expected_dim: int | None = None,
    unit_ball: bool = False,
) -> SampleMatrix:
    """
    Reads a CSV sample file.

    Args:
        path:
            File to read. Blank lines are ignored.
        expected_dim:
            If given, every row must have exactly this many columns.
        unit_ball:
            Enables the unit-ball check of the resulting sample matrix.

    Raises:
        Exceptions.SampleFormatError: a line is not UTF-8, a row is ragged, a field is not a
            finite number, or the dimension differs from `expected_dim`. The message names the
            line.
        Exceptions.EmptySample: the file contains no samples.
    """

    path = str(path)
    rows: list[list[float]] = []
    width = expected_dim
    try:
        with open(path, "rb") as file:
            for lineno, raw in enumerate(file, start=1):
                try:
                    text = raw.decode("utf-8")
                except UnicodeDecodeError:
                    raise Exceptions.SampleFormatError(
                        "not UTF-8 text", path=path, line=lineno,
                    ) from None
                fields = next(csv.reader([text]), [])
                if len(fields) == 0 or all(field.strip() == "" for field in fields):
                    continue
                if width is None:
                    width = len(fields)
                elif len(fields) != width:
                    kind = "dimension mismatch" if expected_dim is not None else "ragged row"
                    raise Exceptions.SampleFormatError(
                        f"{kind}: expected {width} fields, found {len(fields)}",
                        path=path,
                        line=lineno,
                    )
                try:
                    row = [float(field) for field in fields]
                except ValueError:
                    raise Exceptions.SampleFormatError(
                        "non-numeric field",
                        path=path,
                        line=lineno,
                    ) from None
                if not all(math.isfinite(value) for value in row):
                    raise Exceptions.SampleFormatError("non-finite field", path=path, line=lineno)
                rows.append(row)
    except OSError as error:
        raise Exceptions.SampleFormatError(f"cannot read file ({error.strerror})", path=path)

    if len(rows) == 0:
        raise Exceptions.EmptySample()
    Log.info(f"Loaded ${len(rows)} sample$ of dimension |{width}| from |{path}|.")
    return SampleMatrix(np.array(rows, dtype=np.float64), unit_ball=unit_ball)


def save_samples(samples: SampleMatrix | Any, path: str | Path):
    """Writes a sample matrix as CSV with 17 significant digits per value."""
    data = SampleMatrix.coerce(samples).data
    with open(path, "w", encoding="utf-8") as file:
        for row in data:
            file.write(",".join(format_float(value) for value in row) + "\n")
