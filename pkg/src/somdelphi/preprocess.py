"""Respondent dataset loading and unit-variance scaling."""
from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np


class DatasetError(ValueError):
    """Base class for dataset problems."""


class DatasetNotFoundError(DatasetError, FileNotFoundError):
    pass


class RaggedRowError(DatasetError):
    pass


class NonNumericCellError(DatasetError):
    pass


class EmptyDatasetError(DatasetError):
    pass


class DegenerateColumnError(DatasetError):
    pass


@dataclass(frozen=True)
class Scaling:
    """Per-column record of a unit-variance rescale.

    ``std`` is the cumulative factor: ``scaled * std`` recovers the raw column.
    """

    multiplier: np.ndarray
    std: np.ndarray
    original_variance: np.ndarray


@dataclass(frozen=True)
class Dataset:
    variable_names: tuple
    samples: np.ndarray
    scaling: Optional[Scaling] = None

    def __post_init__(self):
        samples = np.array(self.samples, dtype=float)
        if samples.ndim != 2:
            raise DatasetError(f"samples must be a 2-D matrix, got shape {samples.shape}")
        if samples.shape[1] != len(self.variable_names):
            raise DatasetError(
                f"{len(self.variable_names)} names for {samples.shape[1]} columns"
            )
        if not np.all(np.isfinite(samples)):
            raise DatasetError("samples contain NaN or infinite values")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "variable_names", tuple(self.variable_names))

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def n_variables(self) -> int:
        return self.samples.shape[1]

    def select(self, names) -> "Dataset":
        """Column subset by name, in the order given."""
        missing = [n for n in names if n not in self.variable_names]
        if missing:
            raise DatasetError(f"unknown columns: {', '.join(missing)}")
        idx = [self.variable_names.index(n) for n in names]
        scaling = None
        if self.scaling is not None:
            s = self.scaling
            scaling = Scaling(s.multiplier[idx], s.std[idx], s.original_variance[idx])
        return Dataset(tuple(names), self.samples[:, idx], scaling)

    def unscaled(self) -> np.ndarray:
        if self.scaling is None:
            return self.samples.copy()
        return self.samples * self.scaling.std


def load_dataset(path) -> Dataset:
    """Read a headered numeric CSV into a :class:`Dataset`.

    Errors report the 1-based line number and the column name of the offending cell.
    """
    path = Path(path)
    if not path.is_file():
        raise DatasetNotFoundError(f"dataset file not found: {path}")
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or not any(h.strip() for h in header):
            raise EmptyDatasetError(f"{path}: missing header row")
        names = tuple(h.strip() for h in header)
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(names):
                raise RaggedRowError(
                    f"{path}: line {line_no} has {len(row)} cells, expected {len(names)}"
                )
            values = []
            for col, cell in zip(names, row):
                try:
                    values.append(float(cell))
                except ValueError:
                    raise NonNumericCellError(
                        f"{path}: line {line_no}, column {col!r}: "
                        f"{'blank cell' if not cell.strip() else repr(cell) + ' is not numeric'}"
                    ) from None
            rows.append(values)
    if not rows:
        raise EmptyDatasetError(f"{path}: header present but no data rows")
    return Dataset(names, np.array(rows, dtype=float))


def save_dataset(ds: Dataset, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ds.variable_names)
        for row in ds.samples:
            w.writerow([f"{v:.17g}" for v in row])


def scale_unit_variance(ds: Dataset) -> Dataset:
    """Divide every column by its population standard deviation.

    Columns are not mean-centred. Rescaling an already scaled dataset composes
    the scaling records so ``unscaled()`` still returns the raw data.
    """
    if ds.n_samples < 2:
        raise DatasetError("unit-variance scaling needs at least 2 samples")
    variance = ds.samples.var(axis=0)
    std = np.sqrt(variance)
    flat = np.flatnonzero(std == 0)
    if flat.size:
        names = ", ".join(repr(ds.variable_names[j]) for j in flat)
        raise DegenerateColumnError(f"zero-variance column(s) cannot be scaled: {names}")
    multiplier = 1.0 / std
    scaled = ds.samples / std
    if ds.scaling is None:
        record = Scaling(multiplier, std, variance)
    else:
        prev = ds.scaling
        record = Scaling(prev.multiplier * multiplier, prev.std * std, prev.original_variance)
    for arr in (record.multiplier, record.std, record.original_variance):
        arr.setflags(write=False)
    return replace(ds, samples=scaled, scaling=record)
