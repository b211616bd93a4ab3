"""Event files, feature selection, splitting and range normalization.

An event file is plain ASCII with one event per line: twelve
whitespace-separated decimal numbers in the order of ``FIELD_NAMES``.
Class identity is not stored in the file; it comes from which file an
event was loaded from.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

FIELD_NAMES = (
    "fLength",
    "fWidth",
    "fSize",
    "fConc",
    "fConc1",
    "fAsym",
    "fM3Long",
    "fM3Trans",
    "fAlpha",
    "fDist",
    "fEner",
    "fTheta",
)
FEATURE_NAMES = FIELD_NAMES[:10]
N_FIELDS = len(FIELD_NAMES)
N_FEATURES = len(FEATURE_NAMES)


class EventFormatError(ValueError):
    """A line of an event file could not be turned into an event."""

    def __init__(self, message: str, line_number: int | None = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class Label(enum.Enum):
    GAMMA = "gamma"
    HADRON = "hadron"
    UNKNOWN = "unknown"

    @property
    def target(self) -> float:
        """MLP target value: 1 for gammas, 0 for hadrons."""
        if self is Label.GAMMA:
            return 1.0
        if self is Label.HADRON:
            return 0.0
        raise ValueError("unknown label has no training target")


@dataclass(frozen=True)
class EventRecord:
    fLength: float
    fWidth: float
    fSize: float
    fConc: float
    fConc1: float
    fAsym: float
    fM3Long: float
    fM3Trans: float
    fAlpha: float
    fDist: float
    fEner: float
    fTheta: float
    label: Label = Label.UNKNOWN

    def __post_init__(self):
        for name in FIELD_NAMES:
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} is not finite")

    @classmethod
    def from_values(cls, values: Sequence[float], label: Label = Label.UNKNOWN) -> "EventRecord":
        if len(values) != N_FIELDS:
            raise EventFormatError(f"expected {N_FIELDS} values, got {len(values)}")
        return cls(*(float(v) for v in values), label=label)

    def values(self) -> tuple[float, ...]:
        return tuple(getattr(self, name) for name in FIELD_NAMES)

    def with_label(self, label: Label) -> "EventRecord":
        return EventRecord(*self.values(), label=label)


@dataclass(frozen=True)
class Dataset:
    records: tuple[EventRecord, ...]
    source: str = ""

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def feature_matrix(self) -> np.ndarray:
        """(N, 10) array of classification features."""
        if not self.records:
            return np.empty((0, N_FEATURES))
        return np.array([r.values()[:N_FEATURES] for r in self.records], dtype=float)

    def targets(self) -> np.ndarray:
        return np.array([r.label.target for r in self.records], dtype=float)

    def labels(self) -> list[Label]:
        return [r.label for r in self.records]


def parse_event_line(line: str, line_number: int | None = None) -> EventRecord:
    """Parse one line of an event file. The returned record is unlabeled."""
    tokens = line.split()
    if len(tokens) != N_FIELDS:
        raise EventFormatError(
            f"{len(tokens)} tokens, expected {N_FIELDS}", line_number
        )
    values = []
    for tok in tokens:
        try:
            values.append(float(tok))
        except ValueError:
            raise EventFormatError(f"non-numeric token {tok!r}", line_number) from None
    bad = [FIELD_NAMES[i] for i, v in enumerate(values) if not math.isfinite(v)]
    if bad:
        raise EventFormatError(f"non-finite value for {', '.join(bad)}", line_number)
    return EventRecord(*values)


def format_event_line(record: EventRecord) -> str:
    return " ".join(format(v, ".17g") for v in record.values())


def parse_lines(lines: Iterable[str], label: Label = Label.UNKNOWN) -> list[EventRecord]:
    records = []
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        rec = parse_event_line(line, number)
        if label is not Label.UNKNOWN:
            rec = rec.with_label(label)
        records.append(rec)
    return records


def load_dataset(path: str | Path, label: Label = Label.UNKNOWN) -> Dataset:
    """Read an event file; every record is stamped with ``label``.

    Blank lines are skipped. A malformed line aborts the load with an
    :class:`EventFormatError` that names the file and the line number.
    """
    path = Path(path)
    with path.open("r") as fh:
        try:
            records = parse_lines(fh, label)
        except EventFormatError as err:
            raise EventFormatError(f"{path}: {err}", err.line_number) from None
    return Dataset(records, source=str(path))


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    with Path(path).open("w") as fh:
        for rec in dataset:
            fh.write(format_event_line(rec) + "\n")


def features(record: EventRecord) -> np.ndarray:
    """The ten image parameters used for classification (fEner, fTheta dropped)."""
    return np.array(record.values()[:N_FEATURES], dtype=float)


def split_half(dataset: Dataset, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded shuffle, then the first ceil(N/2) records train and the rest test.

    The shuffle is a permutation from numpy's PCG64 generator seeded with
    ``seed``.
    """
    n = len(dataset)
    if n == 0:
        raise ValueError("cannot split an empty dataset")
    order = np.random.Generator(np.random.PCG64(seed)).permutation(n)
    n_train = (n + 1) // 2
    recs = dataset.records
    train = Dataset([recs[i] for i in order[:n_train]], source=f"{dataset.source}[train]")
    test = Dataset([recs[i] for i in order[n_train:]], source=f"{dataset.source}[test]")
    return train, test


@dataclass(frozen=True)
class Normalizer:
    """Per-feature range normalization fitted to a set of vectors."""

    mins: np.ndarray
    maxs: np.ndarray

    def __post_init__(self):
        mins = np.asarray(self.mins, dtype=float).copy()
        maxs = np.asarray(self.maxs, dtype=float).copy()
        if mins.ndim != 1 or mins.shape != maxs.shape:
            raise ValueError("mins and maxs must be 1-D arrays of equal length")
        if np.any(mins > maxs):
            raise ValueError("min exceeds max for some feature")
        mins.flags.writeable = False
        maxs.flags.writeable = False
        object.__setattr__(self, "mins", mins)
        object.__setattr__(self, "maxs", maxs)

    @property
    def dim(self) -> int:
        return self.mins.shape[0]

    def __call__(self, v: np.ndarray) -> np.ndarray:
        return apply_normalizer(self, v)


def fit_normalizer(vectors) -> Normalizer:
    arr = np.asarray(vectors, dtype=float)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValueError("fit_normalizer needs a non-empty list of vectors")
    return Normalizer(arr.min(axis=0), arr.max(axis=0))


def apply_normalizer(normalizer: Normalizer, v) -> np.ndarray:
    """Map each component to (v - min) / (max - min).

    Works on one vector or an (N, dim) array. Constant features map to 0.
    Values outside the fitted range are not clamped.
    """
    if normalizer is None:
        raise ValueError("normalizer has not been fitted")
    arr = np.asarray(v, dtype=float)
    if arr.shape[-1] != normalizer.dim:
        raise ValueError(
            f"vector dimension {arr.shape[-1]} does not match normalizer dimension {normalizer.dim}"
        )
    span = normalizer.maxs - normalizer.mins
    degenerate = span == 0
    safe = np.where(degenerate, 1.0, span)
    out = (arr - normalizer.mins) / safe
    return np.where(degenerate, 0.0, out)


def export_csv(vectors: np.ndarray, labels: Sequence[Label], path: str | Path) -> None:
    """Write feature rows with a header of feature names plus ``label``."""
    vectors = np.asarray(vectors, dtype=float)
    if len(vectors) != len(labels):
        raise ValueError("vectors and labels differ in length")
    with Path(path).open("w") as fh:
        fh.write(",".join(FEATURE_NAMES) + ",label\n")
        for row, lab in zip(vectors, labels):
            fh.write(",".join(repr(float(x)) for x in row) + f",{lab.value}\n")


def labeled_arrays(*datasets: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Stack feature matrices and MLP targets of labeled datasets."""
    xs = [d.feature_matrix() for d in datasets]
    ys = [d.targets() for d in datasets]
    return np.vstack(xs), np.concatenate(ys)

