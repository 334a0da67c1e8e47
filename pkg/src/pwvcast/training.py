"""Training machinery: robust loss, learning-rate schedule, Adam, the
mini-batch loop, and a finite-difference check of the analytic gradients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError, NumericError, ShapeError
from .lstm import (LstmModel, _model_forward_batch, backward, init_model,
                   model_forward, with_normalization)

LR_BASE = 1e-4
LR_CAP = 1e-2


def lr_schedule(epoch: int) -> float:
    """Learning rate for a 0-based epoch: 1e-4 * 10^(epoch/20), capped at 1e-2."""
    if epoch < 0:
        raise DomainError(f"epoch {epoch!r} must be non-negative")
    candidate = LR_BASE * 10.0 ** (epoch / 20)
    return candidate if candidate < LR_CAP else LR_CAP


def huber_loss(pred: float, target: float, delta: float = 1.0) -> tuple[float, float]:
    """Loss and dLoss/dPred for one prediction.

    Quadratic (r^2/2) for |r| <= delta, linear (delta*(|r| - delta/2))
    beyond; the gradient is continuous at the joint.
    """
    if not (math.isfinite(delta) and delta > 0):
        raise ConfigError(f"huber delta {delta!r} must be a positive finite number")
    pred = float(pred)
    target = float(target)
    if not (math.isfinite(pred) and math.isfinite(target)):
        raise DomainError("huber loss requires finite prediction and target")
    r = pred - target
    if abs(r) <= delta:
        return 0.5 * r * r, r
    return delta * (abs(r) - 0.5 * delta), delta * math.copysign(1.0, r)


def _huber_batch(preds: np.ndarray, targets: np.ndarray, delta: float):
    r = preds - targets
    small = np.abs(r) <= delta
    losses = np.where(small, 0.5 * r * r, delta * (np.abs(r) - 0.5 * delta))
    grads = np.where(small, r, delta * np.sign(r))
    return losses, grads


@dataclass(eq=False)
class AdamState:
    """First/second-moment accumulators parallel to the parameter list."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-7

    @classmethod
    def fresh(cls, params: list[np.ndarray], beta1: float = 0.9, beta2: float = 0.999,
              epsilon: float = 1e-7) -> "AdamState":
        return cls(m=[np.zeros_like(p) for p in params],
                   v=[np.zeros_like(p) for p in params],
                   t=0, beta1=beta1, beta2=beta2, epsilon=epsilon)


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState,
              eta: float) -> tuple[list[np.ndarray], AdamState]:
    """One bias-corrected Adam update, applied to ``params`` in place."""
    if not (math.isfinite(eta) and eta > 0):
        raise ConfigError(f"learning rate {eta!r} must be positive")
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeError("parameter, gradient and state lists differ in length")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1 ** state.t
    corr2 = 1.0 - b2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ShapeError(f"gradient shape {g.shape} does not match parameter {p.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= eta * (m / corr1) / (np.sqrt(v / corr2) + state.epsilon)
    return params, state


@dataclass
class TrainConfig:
    """Hyperparameters of one training run (all randomness flows from seed)."""

    epochs: int = 150
    batch_size: int = 32
    huber_delta: float = 1.0
    seed: int = 0
    shuffle: bool = True
    normalize: bool = False
    clip_norm: float | None = None

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs {self.epochs!r} must be >= 1")
        if self.batch_size < 1:
            raise ConfigError(f"batch size {self.batch_size!r} must be >= 1")
        if not (math.isfinite(self.huber_delta) and self.huber_delta > 0):
            raise ConfigError(f"huber delta {self.huber_delta!r} must be positive")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError(f"seed {self.seed!r} must be a non-negative integer")
        if self.clip_norm is not None and not self.clip_norm > 0:
            raise ConfigError(f"clip norm {self.clip_norm!r} must be positive")


def _clip_gradients(arrays: list[np.ndarray], max_norm: float) -> None:
    total = math.sqrt(sum(float(np.sum(a * a)) for a in arrays))
    if total > max_norm:
        scale = max_norm / total
        for a in arrays:
            a *= scale


def train(split, config: TrainConfig, arch=(64,), lr_fn=None):
    """Train a fresh model on the chronological split.

    Each epoch shuffles the training windows with a seeded generator,
    walks them in batches (the last batch may be short), takes one Adam
    step per batch at the scheduled rate, and records the mean loss over
    the epoch's samples.  ``lr_fn`` overrides the schedule (an override
    returning 0 skips the update, leaving parameters untouched).

    Returns (model, per-epoch mean losses).
    """
    if len(split.train) == 0:
        raise DomainError("training set is empty")
    if lr_fn is None:
        lr_fn = lr_schedule

    model = init_model(arch, config.seed, window_width=split.train.width)
    if config.normalize:
        mean = float(np.mean(split.train.inputs))
        std = float(np.std(split.train.inputs))
        model = with_normalization(model, mean, std if std > 0 else 1.0)

    params = model.parameter_arrays()
    state = AdamState.fresh(params)
    shuffle_rng = np.random.default_rng([config.seed, 1])
    inputs = split.train.inputs
    labels = split.train.labels
    n = len(split.train)

    history: list[float] = []
    for epoch in range(config.epochs):
        eta = lr_fn(epoch)
        order = shuffle_rng.permutation(n) if config.shuffle else np.arange(n)
        loss_sum = 0.0
        for batch_index, start in enumerate(range(0, n, config.batch_size)):
            sel = order[start:start + config.batch_size]
            preds, cache = _model_forward_batch(model, inputs[sel])
            losses, grad_preds = _huber_batch(preds, labels[sel], config.huber_delta)
            batch_loss = float(np.mean(losses))
            if not math.isfinite(batch_loss):
                raise NumericError(f"non-finite loss at epoch {epoch}, batch {batch_index}")
            loss_sum += float(np.sum(losses))
            if eta == 0.0:
                continue
            grads = backward(model, cache, grad_preds / len(sel))
            grad_arrays = grads.arrays()
            if config.clip_norm is not None:
                _clip_gradients(grad_arrays, config.clip_norm)
            adam_step(params, grad_arrays, state, eta)
        history.append(loss_sum / n)
    return model, history


def gradient_check(model: LstmModel, window, target: float, delta: float = 1.0,
                   fd_step: float = 1e-5, corruption: float = 0.0) -> float:
    """Max relative disagreement between BPTT and central finite differences.

    Relative error per parameter is |a - n| / max(|a|, |n|, 1e-8).
    ``corruption`` perturbs one analytic gradient entry so tests can
    confirm the check actually detects broken gradients.
    """
    if model.parameter_count() > 100_000:
        raise DomainError("model too large for finite-difference checking")
    window = np.asarray(window, dtype=np.float64)

    def loss_at() -> float:
        pred, _ = model_forward(model, window)
        return huber_loss(pred, target, delta)[0]

    pred, cache = model_forward(model, window)
    _, dpred = huber_loss(pred, target, delta)
    analytic = backward(model, cache, dpred).arrays()
    if corruption:
        analytic[0].flat[0] += corruption

    worst = 0.0
    for p_arr, g_arr in zip(model.parameter_arrays(), analytic):
        flat_p = p_arr.reshape(-1)
        flat_g = g_arr.reshape(-1)
        for k in range(flat_p.size):
            original = flat_p[k]
            flat_p[k] = original + fd_step
            up = loss_at()
            flat_p[k] = original - fd_step
            down = loss_at()
            flat_p[k] = original
            numeric = (up - down) / (2.0 * fd_step)
            a = float(flat_g[k])
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            if rel > worst:
                worst = rel
    return worst
