"""The joint input-output data set and its CSV serialization.

The on-disk format is a headed CSV where every column name starts with
``x`` (an input) or ``y`` (an output), e.g. ``x1,...,x19,y1,...,y50``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError

__all__ = ["DataSet", "load_dataset", "save_dataset", "canonical_subset"]


def canonical_subset(subset: Iterable[int], n_inputs: int, allow_empty: bool = False) -> tuple[int, ...]:
    """Normalize a collection of 1-based input labels to a sorted tuple."""
    labels = tuple(sorted({int(i) for i in subset}))
    if not labels and not allow_empty:
        raise DataError("input subset must be non-empty")
    for label in labels:
        if label < 1 or label > n_inputs:
            raise DataError(f"input label {label} outside 1..{n_inputs}")
    return labels


@dataclass(frozen=True)
class DataSet:
    """Paired input/output sample matrices.

    ``inputs`` is N x n (one column per input variable, labeled 1..n) and
    ``outputs`` is N x m.  All entries must be finite and N >= 2.
    """

    inputs: np.ndarray
    outputs: np.ndarray
    input_labels: tuple[str, ...] = field(default=())
    output_labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        outputs = np.asarray(self.outputs, dtype=float)
        if outputs.ndim == 1:
            outputs = outputs[:, None]
        if inputs.shape[0] != outputs.shape[0]:
            raise DataError(
                f"inputs and outputs disagree on sample count: {inputs.shape[0]} vs {outputs.shape[0]}"
            )
        if inputs.shape[0] < 2:
            raise DataError("a data set needs at least two samples")
        if not np.all(np.isfinite(inputs)):
            raise DataError("inputs contain non-finite entries")
        if not np.all(np.isfinite(outputs)):
            raise DataError("outputs contain non-finite entries")
        inputs.setflags(write=False)
        outputs.setflags(write=False)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "outputs", outputs)
        if not self.input_labels:
            object.__setattr__(self, "input_labels", tuple(f"x{i + 1}" for i in range(inputs.shape[1])))
        if not self.output_labels:
            object.__setattr__(self, "output_labels", tuple(f"y{j + 1}" for j in range(outputs.shape[1])))
        if len(self.input_labels) != inputs.shape[1] or len(self.output_labels) != outputs.shape[1]:
            raise DataError("label count does not match column count")

    @property
    def n_samples(self) -> int:
        return self.inputs.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.inputs.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.outputs.shape[1]

    def input_columns(self, subset: Sequence[int]) -> np.ndarray:
        """Input columns for a subset of 1-based labels, in label order."""
        labels = canonical_subset(subset, self.n_inputs)
        return self.inputs[:, [l - 1 for l in labels]]


def load_dataset(path) -> DataSet:
    """Read a DataSet from a headed CSV with x*/y* column names."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"data file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, missing header") from None
        header = [h.strip() for h in header]
        x_cols, y_cols = [], []
        for idx, name in enumerate(header):
            if name.startswith("x"):
                x_cols.append(idx)
            elif name.startswith("y"):
                y_cols.append(idx)
            else:
                raise DataError(f"{path}: unrecognized column '{name}' (column names must start with x or y)")
        if not x_cols:
            raise DataError(f"{path}: no input (x*) columns")
        if not y_cols:
            raise DataError(f"{path}: no output (y*) columns")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: row {lineno} has {len(row)} cells, expected {len(header)}")
            parsed = []
            for idx, cell in enumerate(row):
                try:
                    value = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}: non-numeric cell at row {lineno}, column '{header[idx]}': {cell!r}"
                    ) from None
                if not np.isfinite(value):
                    raise DataError(f"{path}: non-finite value at row {lineno}, column '{header[idx]}'")
                parsed.append(value)
            rows.append(parsed)
    if len(rows) < 2:
        raise DataError(f"{path}: at least two data rows are required, got {len(rows)}")
    table = np.asarray(rows, dtype=float)
    return DataSet(
        inputs=table[:, x_cols],
        outputs=table[:, y_cols],
        input_labels=tuple(header[i] for i in x_cols),
        output_labels=tuple(header[i] for i in y_cols),
    )


def save_dataset(data: DataSet, path) -> None:
    """Write a DataSet in the same CSV schema accepted by load_dataset."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(data.input_labels) + list(data.output_labels))
        table = np.hstack([data.inputs, data.outputs])
        for row in table:
            writer.writerow([repr(float(v)) for v in row])
