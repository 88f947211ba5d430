"""Core record types shared across the package.

Everything here is immutable. Bulk data lives in :class:`CallTable`, a
columnar view over many calls that the optimizer and the trial harness
operate on directly; :class:`ScoredCall` is the per-record form used at the
ingestion boundary and in small examples.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

N_CLASSES = 5
CLASSES = (1, 2, 3, 4, 5)
#: survey_csat >= this value counts as satisfied / "high CSAT"
SATISFIED_MIN = 4


class CsatError(Exception):
    """Base class for every error raised by this package."""


class RecordError(CsatError, ValueError):
    """A single input record was rejected.

    ``row`` is the 1-based data row number in the source file (header not
    counted) when known; ``reason`` is a short machine-readable code.
    """

    reason = "invalid_record"

    def __init__(self, message: str, row: int | None = None):
        self.row = row
        self.message = message
        where = f"row {row}: " if row is not None else ""
        super().__init__(f"{where}{self.reason}: {message}")


class OutOfRangeProba(RecordError):
    reason = "OutOfRangeProba"


class OutOfRangeLabel(RecordError):
    reason = "OutOfRangeLabel"


class BadTimestamp(RecordError):
    reason = "BadTimestamp"


class MissingField(RecordError):
    reason = "MissingField"


class InvalidThresholds(CsatError, ValueError):
    pass


class EmptyInput(CsatError, ValueError):
    pass


class EmptyDistribution(CsatError, ValueError):
    pass


@dataclass(frozen=True)
class ScoredCall:
    call_id: str
    group_id: str
    timestamp: dt.date
    proba: float
    survey_csat: int | None = None

    def __post_init__(self):
        if not (0.0 <= self.proba <= 1.0):
            raise OutOfRangeProba(f"proba={self.proba!r} not in [0, 1]")
        if self.survey_csat is not None and self.survey_csat not in CLASSES:
            raise OutOfRangeLabel(f"survey_csat={self.survey_csat!r} not in 1..5")

    @property
    def labeled(self) -> bool:
        return self.survey_csat is not None


@dataclass(frozen=True)
class Thresholds:
    """Four probability cut points, highest first.

    ``t12`` separates pCSAT 1 from 2, and so on down to ``t45``.  A call whose
    low-CSAT probability exceeds ``t12`` is mapped to class 1.
    """

    t12: float
    t23: float
    t34: float
    t45: float

    def __post_init__(self):
        vals = self.as_tuple()
        if not all(isinstance(v, (int, float)) and math.isfinite(v) for v in vals):
            raise InvalidThresholds(f"non-finite threshold in {vals}")
        if not all(0.0 < v < 1.0 for v in vals):
            raise InvalidThresholds(f"thresholds must lie strictly inside (0, 1): {vals}")
        if not (self.t12 > self.t23 > self.t34 > self.t45):
            raise InvalidThresholds(f"thresholds must be strictly descending: {vals}")

    @classmethod
    def from_sequence(cls, values: Sequence[float]) -> "Thresholds":
        if len(values) != 4:
            raise InvalidThresholds(f"expected 4 thresholds, got {len(values)}")
        return cls(*(float(v) for v in values))

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.t12, self.t23, self.t34, self.t45)

    def ascending(self) -> np.ndarray:
        return np.array([self.t45, self.t34, self.t23, self.t12])

    def to_dict(self) -> dict[str, float]:
        return {"t12": self.t12, "t23": self.t23, "t34": self.t34, "t45": self.t45}


#: Evenly spaced default; a stand-in to be overridden via config.
DEFAULT_BASELINE = Thresholds(0.8, 0.6, 0.4, 0.2)


@dataclass(frozen=True)
class OrdinalDistribution:
    counts: tuple[int, int, int, int, int]

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if len(counts) != N_CLASSES:
            raise ValueError(f"need {N_CLASSES} class counts, got {len(counts)}")
        if any(c < 0 for c in counts):
            raise ValueError(f"negative class count in {counts}")
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return sum(self.counts)

    @classmethod
    def from_labels(cls, labels: Iterable[int]) -> "OrdinalDistribution":
        arr = np.asarray(list(labels) if not isinstance(labels, np.ndarray) else labels, dtype=np.int64)
        if arr.size and (arr.min() < 1 or arr.max() > N_CLASSES):
            raise OutOfRangeLabel(f"labels outside 1..5: {np.unique(arr)}")
        return cls(tuple(np.bincount(arr, minlength=N_CLASSES + 1)[1:]))

    def as_array(self) -> np.ndarray:
        return np.array(self.counts, dtype=np.float64)


@dataclass(frozen=True)
class LossBreakdown:
    """Loss components for one (predicted, observed) distribution pair.

    ``delta_mean`` is absolute; the signed difference (pred minus observed)
    travels alongside it for diagnostics.
    """

    delta_pct_satisfied: float
    delta_mean: float
    mse: float
    delta_mean_signed: float = 0.0
    total: float = field(init=False)

    def __post_init__(self):
        for name in ("delta_pct_satisfied", "delta_mean", "mse"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0.0):
                raise ValueError(f"{name} must be finite and >= 0, got {v!r}")
        object.__setattr__(
            self, "total", self.delta_pct_satisfied + self.delta_mean + self.mse
        )

    def to_dict(self) -> dict[str, float]:
        return {
            "delta_pct_satisfied": self.delta_pct_satisfied,
            "delta_mean": self.delta_mean,
            "delta_mean_signed": self.delta_mean_signed,
            "mse": self.mse,
            "total": self.total,
        }


@dataclass(frozen=True)
class GroupTrainingStats:
    group_id: str
    n_responses: int
    n_high: int
    n_low: int

    def __post_init__(self):
        if self.n_high < 0 or self.n_low < 0:
            raise ValueError("negative response counts")
        if self.n_high + self.n_low != self.n_responses:
            raise ValueError(
                f"n_high + n_low ({self.n_high} + {self.n_low}) != n_responses ({self.n_responses})"
            )

    @classmethod
    def from_labels(cls, group_id: str, labels: np.ndarray) -> "GroupTrainingStats":
        labels = np.asarray(labels)
        n_high = int(np.count_nonzero(labels >= SATISFIED_MIN))
        return cls(group_id, int(labels.size), n_high, int(labels.size) - n_high)


def _parse_date(value) -> dt.date:
    if isinstance(value, dt.datetime):
        return value.date()
    if isinstance(value, dt.date):
        return value
    return dt.date.fromisoformat(str(value).strip())


def validate_call(record: Mapping[str, object], row: int | None = None) -> ScoredCall:
    """Build a :class:`ScoredCall` from loosely typed fields.

    ``record`` holds ``call_id``, ``group_id``, ``date`` (or ``timestamp``),
    ``proba`` and optionally ``survey_csat``; values may be strings as read
    from CSV.  An empty or missing ``survey_csat`` means the call was not
    surveyed.  Raises a :class:`RecordError` subclass tagged with ``row``.
    """
    for key in ("call_id", "group_id", "proba"):
        if record.get(key) in (None, ""):
            raise MissingField(f"missing {key}", row)
    raw_date = record.get("date", record.get("timestamp"))
    if raw_date in (None, ""):
        raise MissingField("missing date", row)
    try:
        date = _parse_date(raw_date)
    except (TypeError, ValueError):
        raise BadTimestamp(f"unparseable date {raw_date!r}", row) from None

    try:
        proba = float(record["proba"])
    except (TypeError, ValueError):
        raise OutOfRangeProba(f"non-numeric proba {record['proba']!r}", row) from None
    if not (0.0 <= proba <= 1.0):  # also rejects NaN
        raise OutOfRangeProba(f"proba={proba!r} not in [0, 1]", row)

    raw_label = record.get("survey_csat")
    label = None
    if raw_label not in (None, ""):
        try:
            as_float = float(raw_label)
        except (TypeError, ValueError):
            raise OutOfRangeLabel(f"non-numeric survey_csat {raw_label!r}", row) from None
        if not as_float.is_integer() or int(as_float) not in CLASSES:
            raise OutOfRangeLabel(f"survey_csat={raw_label!r} not in 1..5", row)
        label = int(as_float)

    return ScoredCall(str(record["call_id"]), str(record["group_id"]), date, proba, label)


@dataclass(frozen=True, eq=False)
class CallTable:
    """Columnar storage for many calls.

    ``day`` is ``datetime64[D]``; ``label`` is ``int8`` with 0 marking an
    unsurveyed call.  Arrays are made read-only on construction.
    """

    call_id: np.ndarray
    group_id: np.ndarray
    day: np.ndarray
    proba: np.ndarray
    label: np.ndarray

    def __post_init__(self):
        n = len(self.proba)
        cols = {
            "call_id": np.asarray(self.call_id, dtype=object),
            "group_id": np.asarray(self.group_id, dtype=object),
            "day": np.asarray(self.day, dtype="datetime64[D]"),
            "proba": np.asarray(self.proba, dtype=np.float64),
            "label": np.asarray(self.label, dtype=np.int8),
        }
        for name, arr in cols.items():
            if arr.shape != (n,):
                raise ValueError(f"column {name} has shape {arr.shape}, expected ({n},)")
            arr = arr.copy() if arr is getattr(self, name) else arr
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if n and (np.any(~(self.proba >= 0.0)) or np.any(self.proba > 1.0)):
            raise OutOfRangeProba("proba column has values outside [0, 1]")
        if n and (self.label.min() < 0 or self.label.max() > N_CLASSES):
            raise OutOfRangeLabel("label column has values outside 0..5")

    def __len__(self) -> int:
        return len(self.proba)

    def __getitem__(self, index):
        if isinstance(index, (int, np.integer)):
            lab = int(self.label[index])
            return ScoredCall(
                str(self.call_id[index]), str(self.group_id[index]),
                self.day[index].item(), float(self.proba[index]), lab or None,
            )
        return self.take(index)

    def __iter__(self):
        return iter(self.to_calls())

    def __eq__(self, other):
        if not isinstance(other, CallTable):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, c), getattr(other, c))
            for c in ("call_id", "group_id", "day", "proba", "label")
        )

    @classmethod
    def from_calls(cls, calls: Iterable[ScoredCall]) -> "CallTable":
        calls = list(calls)
        return cls(
            call_id=np.array([c.call_id for c in calls], dtype=object),
            group_id=np.array([c.group_id for c in calls], dtype=object),
            day=np.array([np.datetime64(c.timestamp, "D") for c in calls], dtype="datetime64[D]"),
            proba=np.array([c.proba for c in calls], dtype=np.float64),
            label=np.array([c.survey_csat or 0 for c in calls], dtype=np.int8),
        )

    def to_calls(self) -> list[ScoredCall]:
        return [
            ScoredCall(
                str(cid), str(gid), day.item(), float(p), int(lab) if lab else None
            )
            for cid, gid, day, p, lab in zip(
                self.call_id, self.group_id, self.day, self.proba, self.label
            )
        ]

    def take(self, index) -> "CallTable":
        return CallTable(
            self.call_id[index], self.group_id[index], self.day[index],
            self.proba[index], self.label[index],
        )

    @property
    def labeled_mask(self) -> np.ndarray:
        return self.label > 0


def as_table(calls) -> CallTable:
    if isinstance(calls, CallTable):
        return calls
    return CallTable.from_calls(calls)


def labeled_arrays(pool) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(proba, label)`` for the surveyed calls of ``pool``.

    ``pool`` may be a :class:`CallTable`, a sequence of :class:`ScoredCall`,
    or a ``(proba, label)`` pair of arrays.
    """
    if isinstance(pool, tuple) and len(pool) == 2 and not isinstance(pool[0], ScoredCall):
        proba = np.asarray(pool[0], dtype=np.float64)
        label = np.asarray(pool[1], dtype=np.int64)
        if proba.shape != label.shape:
            raise ValueError("proba and label arrays differ in shape")
        keep = label > 0
        return proba[keep], label[keep]
    table = as_table(pool)
    mask = table.labeled_mask
    return np.asarray(table.proba[mask]), np.asarray(table.label[mask], dtype=np.int64)
