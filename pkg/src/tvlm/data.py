"""CSV ingestion, chronological splits, sliding windows, few-shot subsetting.

Files follow the benchmark convention: a header line, a timestamp first
column (ignored for modeling) and D numeric variable columns. Splits are
chronological; validation and test windows may borrow the standard L-1
lookback rows from the preceding split, and forecast targets never cross
back over a split boundary.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    ConfigError,
    EmptyDataError,
    MissingFileError,
    NonNumericCellError,
    RaggedRowError,
)


@dataclass
class DatasetSpec:
    name: str
    path: str = ""
    n_vars: int | None = None     # inferred from the header when None
    frequency: str = ""
    periodicity: int = 24
    train_rows: int | None = None  # explicit sizes; None -> proportional
    val_rows: int | None = None
    test_rows: int | None = None

    def __post_init__(self):
        sizes = (self.train_rows, self.val_rows, self.test_rows)
        explicit = [s for s in sizes if s is not None]
        if explicit and (len(explicit) != 3 or min(explicit) < 1):
            raise ConfigError(f"split sizes must be all-set and positive: {sizes}")
        if self.periodicity < 1:
            raise ConfigError(f"periodicity must be >= 1, got {self.periodicity}")


@dataclass
class WindowSample:
    x: np.ndarray      # (L, D)
    y: np.ndarray      # (H, D), immediately follows x
    start: int         # absolute row index of the first input row


@dataclass
class WindowSet:
    x: np.ndarray      # (n, L, D)
    y: np.ndarray      # (n, H, D)

    @classmethod
    def from_samples(cls, samples):
        if not samples:
            return cls(x=np.zeros((0, 0, 0)), y=np.zeros((0, 0, 0)))
        return cls(x=np.stack([s.x for s in samples]),
                   y=np.stack([s.y for s in samples]))

    def __len__(self):
        return len(self.x)


def load_csv(path, spec: DatasetSpec) -> np.ndarray:
    """Strict parse into a rows x D float matrix.

    First line is the header; the first column of every row is a
    timestamp and is ignored. Any non-numeric cell or ragged row is an
    error naming its location (1-based, header included in row counts).
    """
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"dataset file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyDataError(f"{path}: empty file") from None
        n_vars = spec.n_vars if spec.n_vars is not None else len(header) - 1
        if n_vars < 1:
            raise EmptyDataError(f"{path}: header has no variable columns")
        if len(header) - 1 != n_vars:
            raise RaggedRowError(1, n_vars + 1, len(header))
        rows = []
        for row_idx, row in enumerate(reader, start=2):
            if len(row) != n_vars + 1:
                raise RaggedRowError(row_idx, n_vars + 1, len(row))
            values = np.empty(n_vars)
            for col_idx, cell in enumerate(row[1:], start=2):
                try:
                    values[col_idx - 2] = float(cell)
                except ValueError:
                    raise NonNumericCellError(row_idx, col_idx, cell) from None
            rows.append(values)
    if not rows:
        raise EmptyDataError(f"{path}: header only, no data rows")
    return np.stack(rows)


@dataclass
class SplitBounds:
    train: tuple   # (start, end) row ranges, end exclusive
    val: tuple
    test: tuple

    def __getitem__(self, name):
        return getattr(self, name)


def split(matrix: np.ndarray, spec: DatasetSpec) -> SplitBounds:
    """Chronological (train, val, test) row ranges.

    Explicit sizes from the DatasetSpec are consumed exactly; otherwise
    the proportional 0.7/0.1/0.2 fallback applies.
    """
    rows = len(matrix)
    if spec.train_rows is not None:
        need = spec.train_rows + spec.val_rows + spec.test_rows
        if rows < need:
            raise ConfigError(f"{rows} rows < requested split total {need}")
        a, b = spec.train_rows, spec.train_rows + spec.val_rows
        return SplitBounds(train=(0, a), val=(a, b), test=(b, need))
    a = int(rows * 0.7)
    b = a + int(rows * 0.1)
    if a < 1 or b - a < 1 or rows - b < 1:
        raise ConfigError(f"too few rows ({rows}) for a proportional split")
    return SplitBounds(train=(0, a), val=(a, b), test=(b, rows))


def window(rows: np.ndarray, seq_len: int, horizon: int, stride: int = 1,
           offset: int = 0):
    """Sliding samples over a contiguous slice; count = rows-L-H+1 at stride 1.

    Too-short slices yield an empty list after a warning, not an error.
    `offset` shifts recorded start indices to absolute coordinates.
    """
    n = len(rows)
    if n < seq_len + horizon:
        warnings.warn(f"slice of {n} rows too short for L={seq_len}, H={horizon}; "
                      "no windows produced")
        return []
    samples = []
    for start in range(0, n - seq_len - horizon + 1, stride):
        samples.append(WindowSample(
            x=rows[start:start + seq_len],
            y=rows[start + seq_len:start + seq_len + horizon],
            start=offset + start,
        ))
    return samples


def windows_for_split(matrix: np.ndarray, bounds: SplitBounds, name: str,
                      seq_len: int, horizon: int, stride: int = 1,
                      lookback: bool = True):
    """Windows of one split; val/test may start L-1 rows before their
    boundary so early targets are reachable."""
    start, end = bounds[name]
    if lookback and name in ("val", "test"):
        start = max(0, start - (seq_len - 1))
    return window(matrix[start:end], seq_len, horizon, stride=stride, offset=start)


def few_shot_subset(samples, fraction: float):
    """Chronological prefix of ceil(fraction * count) windows."""
    if not 0.0 < fraction <= 1.0:
        raise ConfigError(f"few-shot fraction must be in (0, 1], got {fraction}")
    if fraction == 1.0:
        return list(samples)
    keep = math.ceil(fraction * len(samples))
    return list(samples[:keep])
