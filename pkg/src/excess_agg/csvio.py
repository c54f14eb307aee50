"""Loss and confidence matrices as CSV: header ``expert_1,...,expert_K``, one row per round."""

from __future__ import annotations

import csv
import os

import numpy as np

from .errors import AggregationError


class CsvFormatError(AggregationError):
    """A CSV file does not follow the expected layout; ``row`` is 1-based (header = 1)."""

    def __init__(self, message: str, path=None, row=None):
        super().__init__(message)
        self.path = None if path is None else str(path)
        self.row = row


def header(n_experts: int) -> list[str]:
    return [f"expert_{k + 1}" for k in range(n_experts)]


def write_matrix(path, matrix) -> None:
    matrix = np.asarray(matrix, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header(matrix.shape[1]))
        for row in matrix:
            w.writerow([format(x, ".17g") for x in row])


def read_matrix(path, n_experts=None) -> np.ndarray:
    """Parse a matrix written by :func:`write_matrix` (or by hand)."""
    if not os.path.exists(path):
        raise CsvFormatError(f"no such file: {path}", path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise CsvFormatError("empty file", path, 1)
    head = [h.strip() for h in rows[0]]
    k = len(head)
    if head != header(k):
        raise CsvFormatError(f"header must be expert_1..expert_{k}, got {rows[0]}", path, 1)
    if n_experts is not None and k != n_experts:
        raise CsvFormatError(f"expected {n_experts} expert columns, found {k}", path, 1)
    out = np.empty((len(rows) - 1, k))
    for i, row in enumerate(rows[1:]):
        line = i + 2
        if len(row) != k:
            raise CsvFormatError(f"row {line} has {len(row)} columns, expected {k}", path, line)
        try:
            out[i] = [float(x) for x in row]
        except ValueError:
            raise CsvFormatError(f"row {line} has a non-numeric entry: {row}", path, line)
    if not np.all(np.isfinite(out)):
        bad = int(np.argwhere(~np.isfinite(out))[0, 0]) + 2
        raise CsvFormatError(f"row {bad} has a non-finite entry", path, bad)
    return out
