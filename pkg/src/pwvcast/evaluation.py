"""RMSE computation, the lead-time sweep over a test split, and report I/O.

For every lead k the sweep keeps only the test windows whose k-step-ahead
ground truth exists inside the same gap-free stretch of the source series;
ground truth always comes from the recorded series, never from model
feedback.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, FormatError
from .forecast import AveragePredictor, ModelPredictor, NaivePredictor
from .lstm import LstmModel
from .series import TimeSeries, WindowSet

REPORT_HEADER = ["lead_minutes", "samples", "model_rmse_mm", "naive_rmse_mm",
                 "average_rmse_mm"]


def rmse(predictions, truths) -> float:
    """Root mean square error between equal-length sequences (mm)."""
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(truths, dtype=np.float64)
    if p.shape != t.shape or p.ndim != 1:
        raise DomainError(f"prediction/truth shapes differ: {p.shape} vs {t.shape}")
    if p.size == 0:
        raise DomainError("rmse of empty sequences is undefined")
    diff = p - t
    return float(np.sqrt(np.mean(diff * diff)))


@dataclass(frozen=True)
class LeadTimeRow:
    lead_steps: int
    lead_minutes: float
    rmse_model_mm: float
    rmse_naive_mm: float
    rmse_average_mm: float
    sample_count: int


@dataclass(frozen=True)
class LeadTimeReport:
    rows: tuple[LeadTimeRow, ...]

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))
        for row in self.rows:
            if row.sample_count <= 0:
                raise DomainError("report rows must have a positive sample count")


def _present_run_lengths(series: TimeSeries) -> np.ndarray:
    """run[i] = number of consecutive present samples starting at i."""
    present = series.present
    run = np.zeros(len(series), dtype=np.int64)
    next_run = 0
    for i in range(len(series) - 1, -1, -1):
        next_run = next_run + 1 if present[i] else 0
        run[i] = next_run
    return run


def lead_time_sweep(predictor, test: WindowSet, source: TimeSeries,
                    leads: int = 12) -> LeadTimeReport:
    """RMSE of model, persistence and window-average per lead time.

    ``predictor`` is a trained model or any object with
    ``predict_batch(windows, lead_steps)``.  A lead with no eligible
    window is skipped with a warning rather than an error.
    """
    if leads < 1:
        raise DomainError(f"lead count {leads!r} must be >= 1")
    if isinstance(predictor, LstmModel):
        predictor = ModelPredictor(predictor)

    if len(test) == 0:
        warnings.warn("no test windows; report is empty", stacklevel=2)
        return LeadTimeReport(rows=())

    offsets = test.label_epochs - source.start_epoch_s
    if (offsets % source.cadence_s != 0).any():
        raise DomainError("window label times are off the source series grid")
    label_idx = offsets // source.cadence_s
    if (label_idx < 0).any() or (label_idx >= len(source)).any():
        raise DomainError("window label times fall outside the source series")
    if not np.array_equal(source.values[label_idx], test.labels):
        raise DomainError("windows were not cut from this source series")

    run = _present_run_lengths(source)
    model_preds = predictor.predict_batch(test.inputs, leads)
    naive_preds = NaivePredictor().predict_batch(test.inputs, leads)
    average_preds = AveragePredictor().predict_batch(test.inputs, leads)

    minutes_per_step = source.cadence_s / 60.0
    rows = []
    for k in range(1, leads + 1):
        truth_idx = label_idx + (k - 1)
        eligible = (truth_idx < len(source)) & (run[label_idx] >= k)
        count = int(np.count_nonzero(eligible))
        if count == 0:
            warnings.warn(f"no eligible test window for lead {k}; row omitted",
                          stacklevel=2)
            continue
        truths = source.values[truth_idx[eligible]]
        rows.append(LeadTimeRow(
            lead_steps=k,
            lead_minutes=k * minutes_per_step,
            rmse_model_mm=rmse(model_preds[eligible, k - 1], truths),
            rmse_naive_mm=rmse(naive_preds[eligible, k - 1], truths),
            rmse_average_mm=rmse(average_preds[eligible, k - 1], truths),
            sample_count=count,
        ))
    return LeadTimeReport(rows=tuple(rows))


def write_report(report: LeadTimeReport, destination) -> None:
    """Write the report as CSV; floats carry 17 significant digits."""
    if hasattr(destination, "write"):
        _write_report_rows(report, destination)
    else:
        with open(destination, "w", newline="") as handle:
            _write_report_rows(report, handle)


def _write_report_rows(report: LeadTimeReport, handle) -> None:
    handle.write(",".join(REPORT_HEADER) + "\n")
    for row in report.rows:
        handle.write(f"{row.lead_minutes:.17g},{row.sample_count},"
                     f"{row.rmse_model_mm:.17g},{row.rmse_naive_mm:.17g},"
                     f"{row.rmse_average_mm:.17g}\n")


def read_report(source) -> LeadTimeReport:
    """Parse a report CSV written by ``write_report``."""
    if hasattr(source, "read"):
        return _read_report_rows(source)
    with open(source, "r", newline="") as handle:
        return _read_report_rows(handle)


def _read_report_rows(handle) -> LeadTimeReport:
    reader = csv.reader(handle)
    header = next(reader, None)
    if header != REPORT_HEADER:
        raise FormatError(f"unexpected report header {header!r}")
    rows = []
    for record in reader:
        if not record:
            continue
        if len(record) != len(REPORT_HEADER):
            raise FormatError(f"report row has {len(record)} fields, expected "
                              f"{len(REPORT_HEADER)}")
        minutes = float(record[0])
        rows.append(LeadTimeRow(
            lead_steps=int(round(minutes / 5.0)),
            lead_minutes=minutes,
            rmse_model_mm=float(record[2]),
            rmse_naive_mm=float(record[3]),
            rmse_average_mm=float(record[4]),
            sample_count=int(record[1]),
        ))
    return LeadTimeReport(rows=tuple(rows))
