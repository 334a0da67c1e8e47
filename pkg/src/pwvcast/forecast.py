"""One-step and iterative multi-step forecasting plus the two statistical
baselines (persistence and window average).

Multi-step forecasts feed each prediction back as the newest window value
and predict again, always in raw millimeter space.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError, ShapeError
from .lstm import LstmModel, _model_forward_batch, model_forward
from .series import WindowSet


def predict_one(model: LstmModel, window) -> float:
    """One-step-ahead prediction (mm) for a single window."""
    pred, _ = model_forward(model, window)
    return pred


def predict_iterative(model: LstmModel, window, lead_steps: int) -> np.ndarray:
    """``lead_steps`` predictions, each one feeding the next window.

    Step 1 predicts from the given window; every later step drops the
    oldest value, appends the previous prediction, and predicts again.
    """
    if lead_steps < 1:
        raise DomainError(f"lead steps {lead_steps!r} must be >= 1")
    current = np.array(window, dtype=np.float64, copy=True)
    out = np.empty(lead_steps)
    for k in range(lead_steps):
        pred = predict_one(model, current)
        out[k] = pred
        current[:-1] = current[1:]
        current[-1] = pred
    return out


def apply_bias_correction(model: LstmModel, beta: float) -> LstmModel:
    """Model whose every prediction is shifted by ``beta`` millimeters.

    The shift is folded into the dense bias (for a normalized model the
    stored increment is beta/std so the raw-scale shift is still exactly
    beta).  The input model is left untouched.
    """
    if not math.isfinite(beta):
        raise DomainError(f"bias {beta!r} must be finite")
    corrected = model.copy()
    increment = beta if model.normalization is None else beta / model.normalization[1]
    corrected.head.b[0] += increment
    return corrected


def estimate_bias(model: LstmModel, validation: WindowSet) -> float:
    """Additive constant that zeroes the mean signed residual.

    Returns -mean(prediction - label) over the validation windows; adding
    it via ``apply_bias_correction`` makes the mean residual vanish.
    """
    if len(validation) == 0:
        raise DomainError("bias estimation needs a non-empty window set")
    preds, _ = _model_forward_batch(model, validation.inputs)
    return float(-np.mean(preds - validation.labels))


def naive_forecast(window, lead_steps: int) -> np.ndarray:
    """Persistence baseline: repeat the most recent value."""
    if lead_steps < 1:
        raise DomainError(f"lead steps {lead_steps!r} must be >= 1")
    w = np.asarray(window, dtype=np.float64)
    if w.ndim != 1 or w.size == 0:
        raise ShapeError("window must be a non-empty vector")
    return np.full(lead_steps, w[-1])


def average_forecast(window, lead_steps: int) -> np.ndarray:
    """Window-average baseline: repeat the mean of the window."""
    if lead_steps < 1:
        raise DomainError(f"lead steps {lead_steps!r} must be >= 1")
    w = np.asarray(window, dtype=np.float64)
    if w.ndim != 1 or w.size == 0:
        raise ShapeError("window must be a non-empty vector")
    return np.full(lead_steps, float(np.mean(w)))


class ModelPredictor:
    """Batched iterative forecaster backed by a trained model."""

    def __init__(self, model: LstmModel):
        self.model = model

    def predict_batch(self, windows, lead_steps: int) -> np.ndarray:
        """(n, lead_steps) predictions for (n, width) windows."""
        if lead_steps < 1:
            raise DomainError(f"lead steps {lead_steps!r} must be >= 1")
        current = np.array(windows, dtype=np.float64, copy=True)
        out = np.empty((current.shape[0], lead_steps))
        for k in range(lead_steps):
            preds, _ = _model_forward_batch(self.model, current)
            out[:, k] = preds
            current[:, :-1] = current[:, 1:]
            current[:, -1] = preds
        return out


class NaivePredictor:
    """Persistence baseline in predictor form."""

    def predict_batch(self, windows, lead_steps: int) -> np.ndarray:
        w = np.asarray(windows, dtype=np.float64)
        return np.repeat(w[:, -1:], lead_steps, axis=1)


class AveragePredictor:
    """Window-average baseline in predictor form."""

    def predict_batch(self, windows, lead_steps: int) -> np.ndarray:
        w = np.asarray(windows, dtype=np.float64)
        return np.repeat(w.mean(axis=1, keepdims=True), lead_steps, axis=1)
