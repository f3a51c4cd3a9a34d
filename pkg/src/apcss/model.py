"""Data model for the balanced two-way layout.

A dataset is a dense I x J x K tensor of responses: I row-factor levels,
J column-factor levels, K replications per cell.  This module provides the
layout types plus the two primitives every test in the package is built
from: alignment (subtracting a row or column center to remove a nuisance
main effect) and within-group midranking.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass

import numpy as np

__all__ = [
    "LayoutDims",
    "AlignmentMethod",
    "Axis",
    "DataTable",
    "RankTable",
    "midranks",
    "align",
    "rank_within",
    "read_data_csv",
]


class AlignmentMethod(enum.Enum):
    """Center used when aligning a row or column: its average or its median."""

    AVERAGE = "average"
    MEDIAN = "median"


class Axis(enum.Enum):
    """Row or column axis of the two-way layout."""

    ROWS = "rows"
    COLUMNS = "columns"


@dataclass(frozen=True)
class LayoutDims:
    """Dimensions of a balanced two-way layout.

    I and J are the numbers of levels of the row and column factors
    (both at least 2); K is the number of replications per cell.
    """

    I: int
    J: int
    K: int

    def __post_init__(self):
        for name in ("I", "J", "K"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
                raise ValueError(f"{name} must be an integer, got {value!r}")
        if self.I < 2 or self.J < 2:
            raise ValueError(f"need at least 2 levels per factor, got I={self.I}, J={self.J}")
        if self.K < 1:
            raise ValueError(f"need at least 1 replication per cell, got K={self.K}")

    @property
    def n_obs(self) -> int:
        return self.I * self.J * self.K

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.I, self.J, self.K)

    def transposed(self) -> "LayoutDims":
        return LayoutDims(self.J, self.I, self.K)

    def __str__(self) -> str:
        return f"{self.I}x{self.J}x{self.K}"


def _frozen_array(values, shape) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if arr.shape != shape:
        raise ValueError(f"expected shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("values must all be finite")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class DataTable:
    """Immutable response tensor Y[i, j, k] for a balanced layout."""

    dims: LayoutDims
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_array(self.values, self.dims.shape))

    def transposed(self) -> "DataTable":
        """Swap the row and column factors (I <-> J)."""
        return DataTable(self.dims.transposed(), self.values.transpose(1, 0, 2))


@dataclass(frozen=True, eq=False)
class RankTable:
    """Midranks of a DataTable, ranked within rows or within columns.

    With axis=ROWS each row's J*K entries are a midrank assignment of
    1..J*K (ties share the average of the positions they occupy); with
    axis=COLUMNS the symmetric statement holds over the I*K entries of
    each column.  Every rank is an integer multiple of 0.5 and each
    group's ranks sum to m(m+1)/2 exactly.
    """

    dims: LayoutDims
    ranks: np.ndarray
    axis: Axis

    def __post_init__(self):
        object.__setattr__(self, "ranks", _frozen_array(self.ranks, self.dims.shape))
        doubled = 2.0 * self.ranks
        if not np.array_equal(doubled, np.round(doubled)):
            raise ValueError("ranks must be integer multiples of 0.5")
        m = self.group_size
        if self.ranks.min() < 1.0 or self.ranks.max() > m:
            raise ValueError(f"ranks must lie in [1, {m}]")
        group_sums = self._grouped().sum(axis=1)
        expected = m * (m + 1) / 2.0
        if not np.all(group_sums == expected):
            raise ValueError(f"each group's ranks must sum to {expected}")

    @property
    def group_size(self) -> int:
        """Number of entries ranked together in one group."""
        if self.axis is Axis.ROWS:
            return self.dims.J * self.dims.K
        return self.dims.I * self.dims.K

    def _grouped(self) -> np.ndarray:
        if self.axis is Axis.ROWS:
            return self.ranks.reshape(self.dims.I, -1)
        return self.ranks.transpose(1, 0, 2).reshape(self.dims.J, -1)


def midranks(values) -> np.ndarray:
    """Midranks of a 1-D sequence.

    The rank of an entry is (number strictly below it) + (t + 1) / 2 where
    t is the size of its tie group, so the output always sums to
    n(n+1)/2.  Raises ValueError on empty or non-finite input.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError("midranks expects a 1-D sequence")
    if arr.size == 0:
        raise ValueError("midranks of an empty sequence is undefined")
    if not np.all(np.isfinite(arr)):
        raise ValueError("midranks requires finite values")
    return _midranks_last_axis(arr[None, :])[0]


def _midranks_last_axis(x: np.ndarray) -> np.ndarray:
    """Midranks along the last axis of an arbitrary-shape float array.

    Exact: tie-group boundary positions are integers, so the computed
    midranks are exact multiples of 0.5 no matter the evaluation order.
    """
    m = x.shape[-1]
    order = np.argsort(x, axis=-1, kind="stable")
    sx = np.take_along_axis(x, order, axis=-1)
    new_run = np.ones(x.shape, dtype=bool)
    np.not_equal(sx[..., 1:], sx[..., :-1], out=new_run[..., 1:])
    pos = np.arange(m)
    first = np.maximum.accumulate(np.where(new_run, pos, 0), axis=-1)
    is_last = np.ones(x.shape, dtype=bool)
    is_last[..., :-1] = new_run[..., 1:]
    last = np.flip(
        np.minimum.accumulate(np.flip(np.where(is_last, pos, m - 1), axis=-1), axis=-1),
        axis=-1,
    )
    rank_sorted = (first + last + 2) * 0.5
    ranks = np.empty_like(x)
    np.put_along_axis(ranks, order, rank_sorted, axis=-1)
    return ranks


def _centered_values(values: np.ndarray, axis: Axis, method: AlignmentMethod) -> np.ndarray:
    """Subtract per-row or per-column centers from ``values``.

    ``values`` has shape (..., I, J, K); the leading axes are batch axes.
    Column alignment centers each column's I*K entries, row alignment each
    row's J*K entries.  Shared by ``align`` and the batched statistic
    drivers so that both paths produce bit-identical tensors.
    """
    if axis is Axis.COLUMNS:
        axes = (-3, -1)
    else:
        axes = (-2, -1)
    if method is AlignmentMethod.AVERAGE:
        center = values.mean(axis=axes, keepdims=True)
    else:
        center = np.median(values, axis=axes, keepdims=True)
    return values - center


def align(table: DataTable, axis: Axis, method: AlignmentMethod) -> DataTable:
    """Align a table by subtracting row or column centers.

    Column alignment subtracts from every entry of column j the average
    (or median) of that column's I*K values; row alignment is symmetric
    over each row's J*K values.  The grand mean is not re-added: ranks
    taken afterwards are unaffected by a global constant.
    """
    return DataTable(table.dims, _centered_values(table.values, axis, method))


def rank_within(table: DataTable, axis: Axis) -> RankTable:
    """Midrank each row (axis=ROWS) or each column (axis=COLUMNS) independently."""
    dims = table.dims
    if axis is Axis.ROWS:
        grouped = table.values.reshape(dims.I, dims.J * dims.K)
        ranks = _midranks_last_axis(grouped).reshape(dims.shape)
    else:
        grouped = table.values.transpose(1, 0, 2).reshape(dims.J, dims.I * dims.K)
        ranks = _midranks_last_axis(grouped).reshape(dims.J, dims.I, dims.K).transpose(1, 0, 2)
    return RankTable(dims, ranks, axis)


def read_data_csv(path) -> DataTable:
    """Read a dataset from CSV with header ``i,j,k,y``.

    Indices are 1-based; one row per observation.  The file is rejected
    unless every (i, j, k) of the full I x J x K grid appears exactly
    once, where I, J, K are the largest indices present.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError("empty CSV: expected header 'i,j,k,y'") from None
        if [h.strip().lower() for h in header] != ["i", "j", "k", "y"]:
            raise ValueError(f"bad CSV header {header!r}: expected 'i,j,k,y'")
        entries: dict[tuple[int, int, int], float] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 4:
                raise ValueError(f"line {lineno}: expected 4 fields, got {len(row)}")
            try:
                i, j, k = (int(field) for field in row[:3])
            except ValueError:
                raise ValueError(f"line {lineno}: indices must be integers") from None
            if i < 1 or j < 1 or k < 1:
                raise ValueError(f"line {lineno}: indices must be >= 1")
            try:
                y = float(row[3])
            except ValueError:
                raise ValueError(f"line {lineno}: response must be a number") from None
            if not np.isfinite(y):
                raise ValueError(f"line {lineno}: response must be finite")
            key = (i, j, k)
            if key in entries:
                raise ValueError(f"duplicate observation for cell (i,j,k)=({i},{j},{k})")
            entries[key] = y
    if not entries:
        raise ValueError("CSV contains no observations")
    I = max(i for i, _, _ in entries)
    J = max(j for _, j, _ in entries)
    K = max(k for _, _, k in entries)
    for i in range(1, I + 1):
        for j in range(1, J + 1):
            for k in range(1, K + 1):
                if (i, j, k) not in entries:
                    raise ValueError(f"missing observation for cell (i,j,k)=({i},{j},{k})")
    dims = LayoutDims(I, J, K)
    values = np.empty(dims.shape)
    for (i, j, k), y in entries.items():
        values[i - 1, j - 1, k - 1] = y
    return DataTable(dims, values)
