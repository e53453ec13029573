"""Core data containers and dataset validation."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np


class DataError(ValueError):
    """Raised when input data violates a contract (shape, finiteness, variance)."""


@dataclass(frozen=True)
class Dataset:
    """Standardized regression view ``y ~ X``.

    ``X`` has centered unit-variance columns (divisor ``n - 1``) and ``y`` is
    centered. The original column means/scales are retained so results can be
    reported in raw units.
    """

    X: np.ndarray
    y: np.ndarray
    column_ids: tuple
    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: float

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def ids_of(self, indices: Iterable[int]) -> list:
        return [self.column_ids[j] for j in sorted(indices)]


@dataclass(frozen=True)
class TruthReport:
    """Realized FDP/TPP of one selection against a known active set."""

    fdp: float
    tpp: float
    num_false: int
    num_true: int
    num_selected: int


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def validate_and_standardize(
    raw_X,
    raw_y,
    column_ids: Optional[Sequence] = None,
) -> Dataset:
    """Validate ``raw_X``/``raw_y`` and return a standardized :class:`Dataset`.

    Columns of ``X`` are centered and scaled to unit sample standard
    deviation (divisor ``n - 1``); ``y`` is centered only.

    Raises
    ------
    DataError
        On empty input, mismatched row counts, non-finite entries (the message
        carries the offending coordinates) or zero-variance columns (the
        message names the column id).
    """
    X = np.array(raw_X, dtype=float, copy=True)
    y = np.array(raw_y, dtype=float, copy=True).reshape(-1)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DataError("predictor matrix must be a non-empty 2-D array")
    n, p = X.shape
    if y.shape[0] != n:
        raise DataError(f"dimension mismatch: X has {n} rows but y has {y.shape[0]} entries")
    if n < 2:
        raise DataError("at least two samples are required")
    if column_ids is None:
        column_ids = tuple(range(p))
    else:
        column_ids = tuple(column_ids)
        if len(column_ids) != p:
            raise DataError(f"{len(column_ids)} column ids given for {p} columns")

    bad = np.argwhere(~np.isfinite(X))
    if bad.size:
        i, j = bad[0]
        raise DataError(f"non-finite entry in X at row {i}, column {column_ids[j]!r}")
    bad_y = np.flatnonzero(~np.isfinite(y))
    if bad_y.size:
        raise DataError(f"non-finite entry in y at row {bad_y[0]}")

    x_mean = X.mean(axis=0)
    Xc = X - x_mean
    x_scale = np.sqrt((Xc**2).sum(axis=0) / (n - 1))
    # relative test catches constant columns that leave rounding residue
    tiny = x_scale <= 1e-12 * np.maximum(1.0, np.abs(x_mean))
    if tiny.any():
        j = int(np.flatnonzero(tiny)[0])
        raise DataError(f"zero-variance column {column_ids[j]!r}")
    Xs = Xc / x_scale
    y_mean = float(y.mean())
    yc = y - y_mean
    return Dataset(
        X=_readonly(Xs),
        y=_readonly(yc),
        column_ids=column_ids,
        x_mean=_readonly(x_mean),
        x_scale=_readonly(x_scale),
        y_mean=y_mean,
    )


def truth_report(selected: Iterable[int], true_active: Iterable[int]) -> TruthReport:
    sel = set(int(j) for j in selected)
    act = set(int(j) for j in true_active)
    num_true = len(sel & act)
    num_false = len(sel) - num_true
    r = len(sel)
    return TruthReport(
        fdp=num_false / max(1, r),
        tpp=num_true / max(1, len(act)),
        num_false=num_false,
        num_true=num_true,
        num_selected=r,
    )
