"""Fixed-cadence series handling: CSV ingestion, gap segmentation, sliding
windows, and the chronological train/test split.

A series lives on a rigid grid: sample ``i`` sits at
``start_epoch_s + i * cadence_s``.  Missing grid slots are stored as NaN;
no interpolation is ever performed, a gap simply terminates the runs that
windows may be cut from.
"""

from __future__ import annotations

import csv
import math
import re
import warnings
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from .errors import AlignmentError, ConfigError, DomainError, ParseError

CADENCE_S = 300  # one reading every 5 minutes

_ISO_FORMAT = "%Y-%m-%dT%H:%M:%SZ"
_ISO_RE = re.compile(r"\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}Z")
_EPOCH_RE = re.compile(r"-?\d+")


def _iso(epoch_s: int) -> str:
    return datetime.fromtimestamp(epoch_s, tz=timezone.utc).strftime(_ISO_FORMAT)


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Scalar millimeter series on a fixed grid; NaN marks a missing slot."""

    start_epoch_s: int
    values: np.ndarray
    cadence_s: int = CADENCE_S

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 1:
            raise DomainError("series values must be one-dimensional")
        if self.cadence_s <= 0:
            raise DomainError(f"cadence {self.cadence_s!r} must be positive")
        if np.isinf(vals).any():
            raise DomainError("series contains non-finite (infinite) values")
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "start_epoch_s", int(self.start_epoch_s))
        object.__setattr__(self, "cadence_s", int(self.cadence_s))

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def present(self) -> np.ndarray:
        return ~np.isnan(self.values)

    def epoch_at(self, index: int) -> int:
        return self.start_epoch_s + index * self.cadence_s

    def epochs(self) -> np.ndarray:
        return self.start_epoch_s + np.arange(len(self), dtype=np.int64) * self.cadence_s


@dataclass(frozen=True, eq=False)
class WindowSet:
    """Gap-free input windows with their next-step labels.

    ``inputs`` has shape (n, width); ``labels`` and ``label_epochs`` have
    length n.  Window ``i`` covers ``width`` consecutive readings and its
    label is the reading one cadence step after the window ends.
    """

    inputs: np.ndarray
    labels: np.ndarray
    label_epochs: np.ndarray
    width: int = 48

    def __post_init__(self):
        inputs = np.array(self.inputs, dtype=np.float64, copy=True, order="C")
        labels = np.array(self.labels, dtype=np.float64, copy=True)
        epochs = np.array(self.label_epochs, dtype=np.int64, copy=True)
        if inputs.ndim != 2 or inputs.shape[1] != self.width:
            raise DomainError(f"window inputs must be (n, {self.width})")
        if labels.shape != (inputs.shape[0],) or epochs.shape != labels.shape:
            raise DomainError("labels and label_epochs must match the window count")
        if not (np.isfinite(inputs).all() and np.isfinite(labels).all()):
            raise DomainError("windows must be gap-free and finite")
        if epochs.size > 1 and not (np.diff(epochs) > 0).all():
            raise DomainError("windows must be strictly ordered by label time")
        for arr, name in ((inputs, "inputs"), (labels, "labels"), (epochs, "label_epochs")):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return self.labels.shape[0]

    def take(self, indices) -> "WindowSet":
        return WindowSet(inputs=self.inputs[indices], labels=self.labels[indices],
                         label_epochs=self.label_epochs[indices], width=self.width)


@dataclass(frozen=True, eq=False)
class SplitSet:
    """Chronological train/test partition of a WindowSet."""

    train: WindowSet
    test: WindowSet
    train_fraction: float

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise DomainError(f"train fraction {self.train_fraction!r} outside (0, 1)")
        if len(self.train) and len(self.test):
            if self.train.label_epochs[-1] >= self.test.label_epochs[0]:
                raise DomainError("train windows must precede all test windows")


def _empty_window_set(width: int) -> WindowSet:
    return WindowSet(inputs=np.empty((0, width)), labels=np.empty(0),
                     label_epochs=np.empty(0, dtype=np.int64), width=width)


def _parse_timestamp(raw: str, epoch_mode: bool, lineno: int) -> int:
    raw = raw.strip()
    if epoch_mode:
        if not _EPOCH_RE.fullmatch(raw):
            raise ParseError(f"line {lineno}: timestamp {raw!r} is not integer epoch seconds")
        return int(raw)
    if not _ISO_RE.fullmatch(raw):
        raise ParseError(f"line {lineno}: timestamp {raw!r} is not ISO-8601 UTC "
                         f"(expected YYYY-MM-DDThh:mm:ssZ)")
    try:
        dt = datetime.strptime(raw, _ISO_FORMAT).replace(tzinfo=timezone.utc)
    except ValueError as exc:
        raise ParseError(f"line {lineno}: invalid timestamp {raw!r}: {exc}") from exc
    return int(dt.timestamp())


def _parse_value(raw: str, lineno: int) -> float:
    try:
        value = float(raw)
    except ValueError as exc:
        raise ParseError(f"line {lineno}: value {raw!r} is not a number") from exc
    if not math.isfinite(value):
        raise ParseError(f"line {lineno}: value {raw!r} is not finite")
    return value


def _read_rows(source):
    """Yield (lineno, timestamp_field, value_field) from a path or stream."""
    if hasattr(source, "read"):
        yield from _read_rows_from(source)
    else:
        with open(source, "r", newline="") as handle:
            yield from _read_rows_from(handle)


def _read_rows_from(handle):
    reader = csv.reader(handle)
    header = next(reader, None)
    if header is None or [c.strip() for c in header] != ["timestamp", "value"]:
        raise ParseError("line 1: expected header 'timestamp,value'")
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 2:
            raise ParseError(f"line {lineno}: expected two fields, got {len(row)}")
        yield lineno, row[0], row[1]


def ingest_csv(source, kind: str = "pwv", station=None) -> TimeSeries:
    """Read a ``timestamp,value`` CSV into a PWV series at 300 s cadence.

    Timestamps are ISO-8601 UTC or integer epoch seconds; the format is
    auto-detected from the first data row and then enforced for the whole
    file.  Rows must be sorted, unique, and on the grid anchored at the
    first row.  Grid slots with no row become gaps.  With ``kind='zwd'``
    the values are converted to PWV, which requires ``station``.
    """
    if kind not in ("zwd", "pwv"):
        raise ConfigError(f"kind must be 'zwd' or 'pwv', got {kind!r}")
    if kind == "zwd" and station is None:
        raise ConfigError("kind='zwd' requires station metadata (latitude and height)")

    epochs: list[int] = []
    values: list[float] = []
    epoch_mode = None
    for lineno, ts_raw, val_raw in _read_rows(source):
        if epoch_mode is None:
            epoch_mode = bool(_EPOCH_RE.fullmatch(ts_raw.strip()))
        epoch = _parse_timestamp(ts_raw, epoch_mode, lineno)
        value = _parse_value(val_raw, lineno)
        if epochs:
            if epoch == epochs[-1]:
                raise ParseError(f"line {lineno}: duplicate timestamp {ts_raw.strip()!r}")
            if epoch < epochs[-1]:
                raise ParseError(f"line {lineno}: timestamps not sorted ascending")
            if (epoch - epochs[0]) % CADENCE_S != 0:
                raise AlignmentError(f"line {lineno}: timestamp {ts_raw.strip()!r} "
                                     f"is off the {CADENCE_S} s grid")
        values.append(value)
        epochs.append(epoch)

    if not epochs:
        series = TimeSeries(start_epoch_s=0, values=np.empty(0), cadence_s=CADENCE_S)
    else:
        n_slots = (epochs[-1] - epochs[0]) // CADENCE_S + 1
        grid = np.full(n_slots, np.nan)
        for epoch, value in zip(epochs, values):
            grid[(epoch - epochs[0]) // CADENCE_S] = value
        series = TimeSeries(start_epoch_s=epochs[0], values=grid, cadence_s=CADENCE_S)

    if kind == "zwd":
        from .conversion import convert_series

        series = convert_series(series, station)
    return series


def export_csv(series: TimeSeries, destination) -> None:
    """Write one ``timestamp,value`` row per present sample (ISO-8601 UTC).

    Values are printed with 17 significant digits so a re-ingest restores
    them bit-exactly.  Leading or trailing gaps are not representable in
    the file and are dropped on a round trip.
    """
    if hasattr(destination, "write"):
        _write_rows(series, destination)
    else:
        with open(destination, "w", newline="") as handle:
            _write_rows(series, handle)


def _write_rows(series: TimeSeries, handle) -> None:
    handle.write("timestamp,value\n")
    for idx in np.flatnonzero(series.present):
        handle.write(f"{_iso(series.epoch_at(int(idx)))},{series.values[idx]:.17g}\n")


def segment_gaps(series: TimeSeries) -> list[TimeSeries]:
    """Maximal gap-free segments, in time order.

    Concatenating the segments and the gaps between them reconstructs the
    input series exactly.
    """
    present = series.present
    segments = []
    n = len(series)
    i = 0
    while i < n:
        if not present[i]:
            i += 1
            continue
        j = i
        while j < n and present[j]:
            j += 1
        segments.append(TimeSeries(start_epoch_s=series.epoch_at(i),
                                   values=series.values[i:j],
                                   cadence_s=series.cadence_s))
        i = j
    return segments


def make_windows(series: TimeSeries, width: int = 48) -> WindowSet:
    """Cut unit-stride sliding windows with next-step labels.

    Each gap-free segment of length L yields max(0, L - width) windows:
    inputs are samples [i, i+width), the label is sample i+width.  Short
    segments simply yield nothing.
    """
    if width < 1:
        raise DomainError(f"window width {width!r} must be >= 1")
    inputs, labels, epochs = [], [], []
    for segment in segment_gaps(series):
        length = len(segment)
        if length <= width:
            continue
        view = np.lib.stride_tricks.sliding_window_view(segment.values, width)
        inputs.append(np.ascontiguousarray(view[: length - width]))
        labels.append(segment.values[width:])
        epochs.append(segment.epochs()[width:])
    if not inputs:
        return _empty_window_set(width)
    return WindowSet(inputs=np.concatenate(inputs),
                     labels=np.concatenate(labels),
                     label_epochs=np.concatenate(epochs),
                     width=width)


def chrono_split(windows: WindowSet, train_fraction: float = 0.8) -> SplitSet:
    """First floor(fraction * n) windows by label time train, rest test."""
    if len(windows) == 0:
        raise DomainError("cannot split an empty window set")
    if not 0.0 < train_fraction < 1.0:
        raise DomainError(f"train fraction {train_fraction!r} outside (0, 1)")
    n_train = int(math.floor(train_fraction * len(windows)))
    if n_train == 0:
        warnings.warn("train fraction leaves zero training windows", stacklevel=2)
    return SplitSet(train=windows.take(slice(0, n_train)),
                    test=windows.take(slice(n_train, len(windows))),
                    train_fraction=train_fraction)
