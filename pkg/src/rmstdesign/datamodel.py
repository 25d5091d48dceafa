"""Trial and reference datasets, plus the CSV interchange format.

Data are stored column-wise in read-only numpy arrays. ``time`` and
``event`` are fixed column names; the arm column and the covariate columns
are named by the caller.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, NamedTuple, Optional, Sequence

import numpy as np

from .errors import (
    ArmAbsent,
    EmptyDataset,
    InvalidIndicator,
    MissingColumn,
    NonNumericValue,
    NonPositiveTime,
)

logger = logging.getLogger(__name__)

MISSING_MARKERS = frozenset({"", "na", "nan", "null", "none", "."})


class SubjectRecord(NamedTuple):
    time: float
    event: int
    arm: Optional[int]
    covariates: tuple


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SurvivalDataset:
    """Right-censored observations ``(X, Delta, Z, V)``.

    Parameters
    ----------
    time : array_like
        Observed times ``min(T, C)``; strictly positive and finite.
    event : array_like
        1 if the failure was observed, 0 if censored.
    arm : array_like or None
        Treatment indicator (1 = treatment, 0 = control). ``None`` for
        blinded or single-arm data.
    covariates : array_like, shape (n, p), optional
    covariate_names : sequence of str, optional
    dropped : int
        Rows removed by the missing-data policy at load time.
    """

    time: np.ndarray
    event: np.ndarray
    arm: Optional[np.ndarray] = None
    covariates: Optional[np.ndarray] = None
    covariate_names: tuple = ()
    dropped: int = field(default=0, compare=False)

    def __post_init__(self):
        time = np.asarray(self.time, dtype=float).ravel()
        n = time.size
        if n == 0:
            raise EmptyDataset("dataset has no subjects")
        if not np.all(np.isfinite(time)) or np.any(time <= 0):
            bad = int(np.flatnonzero(~(np.isfinite(time) & (time > 0)))[0])
            raise NonPositiveTime(f"row {bad + 1}: time must be positive and finite, got {time[bad]!r}")
        event = np.asarray(self.event, dtype=float).ravel()
        if event.size != n:
            raise ValueError("time and event lengths differ")
        _check_indicator(event, "event")
        arm = self.arm
        if arm is not None:
            arm = np.asarray(arm, dtype=float).ravel()
            if arm.size != n:
                raise ValueError("time and arm lengths differ")
            _check_indicator(arm, "arm")
        names = tuple(self.covariate_names)
        cov = self.covariates
        if cov is None:
            cov = np.empty((n, len(names)))
        cov = np.asarray(cov, dtype=float)
        if cov.ndim == 1:
            cov = cov.reshape(n, -1) if n else cov.reshape(0, 0)
        if cov.shape[0] != n:
            raise ValueError("covariate rows do not match number of subjects")
        if not names and cov.shape[1]:
            names = tuple(f"V{j + 1}" for j in range(cov.shape[1]))
        if cov.shape[1] != len(names):
            raise ValueError(f"{cov.shape[1]} covariate columns but {len(names)} names")
        if not np.all(np.isfinite(cov)):
            bad = int(np.flatnonzero(~np.all(np.isfinite(cov), axis=1))[0])
            raise NonNumericValue(f"row {bad + 1}: non-finite covariate value")
        object.__setattr__(self, "time", _frozen(time, float))
        object.__setattr__(self, "event", _frozen(event, np.int8))
        object.__setattr__(self, "arm", None if arm is None else _frozen(arm, np.int8))
        object.__setattr__(self, "covariates", _frozen(cov, float))
        object.__setattr__(self, "covariate_names", names)

    @property
    def n(self) -> int:
        return self.time.size

    def __len__(self):
        return self.time.size

    @property
    def has_arm(self) -> bool:
        return self.arm is not None

    @property
    def n_events(self) -> int:
        return int(self.event.sum())

    @property
    def subjects(self) -> Iterator[SubjectRecord]:
        for i in range(self.n):
            yield SubjectRecord(
                float(self.time[i]),
                int(self.event[i]),
                None if self.arm is None else int(self.arm[i]),
                tuple(float(v) for v in self.covariates[i]),
            )

    def require_arm(self) -> np.ndarray:
        if self.arm is None:
            raise ArmAbsent("operation requires a treatment arm column but the dataset is blinded")
        return self.arm

    def covariate_matrix(self, names: Optional[Sequence[str]] = None) -> np.ndarray:
        if names is None:
            return self.covariates
        idx = [self._column_index(c) for c in names]
        return self.covariates[:, idx]

    def _column_index(self, name):
        try:
            return self.covariate_names.index(name)
        except ValueError:
            raise MissingColumn(f"covariate {name!r} not in dataset") from None

    def select(self, names: Sequence[str]) -> "SurvivalDataset":
        """Return a copy carrying only the named covariates, in that order."""
        names = tuple(names)
        return SurvivalDataset(self.time, self.event, self.arm,
                               self.covariate_matrix(names).reshape(self.n, len(names)), names)

    def subset(self, index) -> "SurvivalDataset":
        index = np.asarray(index)
        return SurvivalDataset(
            self.time[index], self.event[index],
            None if self.arm is None else self.arm[index],
            self.covariates[index], self.covariate_names,
        )

    def head(self, n: int) -> "SurvivalDataset":
        return self.subset(np.arange(min(n, self.n)))

    def blind(self) -> "SurvivalDataset":
        """Drop the treatment arm column."""
        return SurvivalDataset(self.time, self.event, None, self.covariates, self.covariate_names)

    def equals(self, other: "SurvivalDataset") -> bool:
        if self.covariate_names != other.covariate_names or self.has_arm != other.has_arm:
            return False
        same = (np.array_equal(self.time, other.time)
                and np.array_equal(self.event, other.event)
                and np.array_equal(self.covariates, other.covariates))
        if self.has_arm:
            same = same and np.array_equal(self.arm, other.arm)
        return same


def _check_indicator(values, name):
    ok = (values == 0) | (values == 1)
    if not np.all(ok):
        bad = int(np.flatnonzero(~ok)[0])
        raise InvalidIndicator(f"row {bad + 1}: {name} must be 0 or 1, got {values[bad]!r}")


def split_by_arm(d: SurvivalDataset) -> tuple["ArmPart", "ArmPart"]:
    """Partition into (control, treatment). Either part may be empty."""
    arm = d.require_arm()
    return ArmPart(d, arm == 0), ArmPart(d, arm == 1)


class ArmPart:
    """Lightweight view of one arm; may be empty (a ``SurvivalDataset`` may not)."""

    def __init__(self, parent: SurvivalDataset, mask):
        self.index = np.flatnonzero(mask)
        self.time = parent.time[self.index]
        self.event = parent.event[self.index]
        self.arm = parent.arm[self.index]
        self.covariates = parent.covariates[self.index]
        self.covariate_names = parent.covariate_names

    @property
    def n(self):
        return self.index.size

    def __len__(self):
        return self.index.size

    def to_dataset(self) -> SurvivalDataset:
        if not self.n:
            raise EmptyDataset("arm has no subjects")
        return SurvivalDataset(self.time, self.event, self.arm, self.covariates, self.covariate_names)


def _parse_number(text, row, column):
    try:
        value = float(text)
    except ValueError:
        raise NonNumericValue(f"row {row}: column {column!r} is not numeric: {text!r}") from None
    if not math.isfinite(value):
        raise NonNumericValue(f"row {row}: column {column!r} is not finite: {text!r}")
    return value


def load_csv(
    path,
    arm_column: Optional[str] = None,
    covariate_columns: Sequence[str] = (),
    drop_missing: bool = False,
) -> SurvivalDataset:
    """Read a dataset from a CSV file with a header row.

    Rows are reported 1-based counting data rows only (the header is not a
    row). Missing values in ``time``, ``event``, the arm column or any
    requested covariate raise :class:`NonNumericValue` unless
    ``drop_missing`` is set, in which case the row is dropped (listwise over
    the requested columns) and the count is stored in ``dataset.dropped``.
    """
    path = Path(path)
    covariate_columns = tuple(covariate_columns)
    wanted = ["time", "event"] + ([arm_column] if arm_column else []) + list(covariate_columns)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptyDataset(f"{path}: file is empty") from None
        for col in wanted:
            if col not in header:
                raise MissingColumn(f"{path}: required column {col!r} not found (have {header})")
        pos = [header.index(c) for c in wanted]
        rows, dropped = [], 0
        for rowno, raw in enumerate(reader, start=1):
            if not raw or all(not x.strip() for x in raw):
                continue
            cells = [raw[p].strip() if p < len(raw) else "" for p in pos]
            missing = [c for c, v in zip(wanted, cells) if v.lower() in MISSING_MARKERS]
            if missing:
                if drop_missing:
                    dropped += 1
                    continue
                raise NonNumericValue(f"row {rowno}: missing value in column(s) {missing}")
            rows.append((rowno, [_parse_number(v, rowno, c) for c, v in zip(wanted, cells)]))
    if not rows:
        raise EmptyDataset(f"{path}: no data rows")
    if dropped:
        logger.warning("%s: dropped %d row(s) with missing values", path, dropped)
    rownos = [r for r, _ in rows]
    data = np.array([v for _, v in rows], dtype=float)
    for j, name in enumerate(wanted[:2 + bool(arm_column)]):
        col = data[:, j]
        if name == "time":
            bad = np.flatnonzero(col <= 0)
            if bad.size:
                raise NonPositiveTime(f"row {rownos[bad[0]]}: time must be positive, got {col[bad[0]]!r}")
        else:
            bad = np.flatnonzero((col != 0) & (col != 1))
            if bad.size:
                raise InvalidIndicator(f"row {rownos[bad[0]]}: {name} must be 0 or 1, got {col[bad[0]]!r}")
    k = 3 if arm_column else 2
    return SurvivalDataset(
        time=data[:, 0],
        event=data[:, 1],
        arm=data[:, 2] if arm_column else None,
        covariates=data[:, k:],
        covariate_names=covariate_columns,
        dropped=dropped,
    )


def _fmt(x: float) -> str:
    if float(x).is_integer() and abs(x) < 1e16:
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(d: SurvivalDataset, path, arm_column: str = "arm") -> None:
    """Write ``d`` in the interchange format (17 significant digits)."""
    header = ["time", "event"] + ([arm_column] if d.has_arm else []) + list(d.covariate_names)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(d.n):
            row = [_fmt(d.time[i]), str(int(d.event[i]))]
            if d.has_arm:
                row.append(str(int(d.arm[i])))
            row.extend(_fmt(v) for v in d.covariates[i])
            w.writerow(row)
