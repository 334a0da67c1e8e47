"""From-scratch LSTM regression core.

Weights for the four gates are stacked row-wise in a fixed order (input,
forget, cell candidate, output), so each recurrence step is two matrix
products plus elementwise gate math.  The forward pass caches every
intermediate needed for exact backpropagation through time; no gradient
is ever approximated.

Everything here is float64 and deterministic given the seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import CacheError, ConfigError, DomainError, NumericError, ShapeError

GATE_ORDER = ("i", "f", "g", "o")  # input, forget, cell candidate, output


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # tanh form avoids exp overflow for very negative arguments
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _gate_slices(hidden: int):
    return tuple(slice(k * hidden, (k + 1) * hidden) for k in range(4))


@dataclass(eq=False)
class LstmLayerParams:
    """One LSTM layer: gate-stacked input weights W (4h, d), recurrent
    weights U (4h, h), and biases b (4h,)."""

    W: np.ndarray
    U: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        self.U = np.asarray(self.U, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        if self.W.ndim != 2 or self.W.shape[0] % 4 != 0:
            raise ShapeError(f"W must be (4*hidden, input), got {self.W.shape}")
        hidden = self.W.shape[0] // 4
        if self.U.shape != (4 * hidden, hidden):
            raise ShapeError(f"U must be {(4 * hidden, hidden)}, got {self.U.shape}")
        if self.b.shape != (4 * hidden,):
            raise ShapeError(f"b must be ({4 * hidden},), got {self.b.shape}")
        for arr in (self.W, self.U, self.b):
            if not np.isfinite(arr).all():
                raise DomainError("layer parameters must be finite")

    @property
    def hidden_size(self) -> int:
        return self.W.shape[0] // 4

    @property
    def input_size(self) -> int:
        return self.W.shape[1]

    def copy(self) -> "LstmLayerParams":
        return LstmLayerParams(W=self.W.copy(), U=self.U.copy(), b=self.b.copy())


@dataclass(eq=False)
class DenseParams:
    """Linear readout: weight vector w (hidden,) and bias b (1,)."""

    w: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        if self.w.ndim != 1:
            raise ShapeError(f"dense weight must be a vector, got shape {self.w.shape}")
        if self.b.shape != (1,):
            raise ShapeError(f"dense bias must have shape (1,), got {self.b.shape}")
        if not (np.isfinite(self.w).all() and np.isfinite(self.b).all()):
            raise DomainError("dense parameters must be finite")

    def copy(self) -> "DenseParams":
        return DenseParams(w=self.w.copy(), b=self.b.copy())


@dataclass(eq=False)
class LstmModel:
    """Stacked LSTM layers plus a one-neuron linear head.

    ``normalization`` is an optional (mean, std) pair applied to inputs
    and inverted on the output, so predictions stay in millimeters.
    """

    layers: list[LstmLayerParams]
    head: DenseParams
    window_width: int = 48
    normalization: tuple[float, float] | None = None

    def __post_init__(self):
        if not self.layers:
            raise ConfigError("model needs at least one LSTM layer")
        if self.layers[0].input_size != 1:
            raise ShapeError("first layer must take scalar inputs (input_size 1)")
        for below, above in zip(self.layers, self.layers[1:]):
            if above.input_size != below.hidden_size:
                raise ShapeError(f"layer input size {above.input_size} does not match "
                                 f"previous hidden size {below.hidden_size}")
        if self.head.w.shape != (self.layers[-1].hidden_size,):
            raise ShapeError("dense weight length must equal last hidden size")
        if self.window_width < 1:
            raise ConfigError(f"window width {self.window_width!r} must be >= 1")
        if self.normalization is not None:
            mean, std = self.normalization
            if not (math.isfinite(mean) and math.isfinite(std) and std > 0):
                raise ConfigError(f"normalization (mean, std) invalid: {self.normalization!r}")
            self.normalization = (float(mean), float(std))

    @property
    def hidden_sizes(self) -> tuple[int, ...]:
        return tuple(layer.hidden_size for layer in self.layers)

    def parameter_arrays(self) -> list[np.ndarray]:
        """Live parameter arrays in canonical order (optimizer order)."""
        arrays: list[np.ndarray] = []
        for layer in self.layers:
            arrays.extend((layer.W, layer.U, layer.b))
        arrays.extend((self.head.w, self.head.b))
        return arrays

    def parameter_count(self) -> int:
        return sum(arr.size for arr in self.parameter_arrays())

    def copy(self) -> "LstmModel":
        return LstmModel(layers=[layer.copy() for layer in self.layers],
                         head=self.head.copy(),
                         window_width=self.window_width,
                         normalization=self.normalization)


@dataclass(eq=False)
class ModelGradients:
    """Gradient arrays mirroring the model parameter layout."""

    layers: list[LstmLayerParams]
    head: DenseParams

    def arrays(self) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for layer in self.layers:
            out.extend((layer.W, layer.U, layer.b))
        out.extend((self.head.w, self.head.b))
        return out


def init_model(arch, seed: int, window_width: int = 48) -> LstmModel:
    """Build a model with fan-scaled symmetric-uniform weights.

    Every weight matrix is drawn from U(-r, r) with r = sqrt(6/(fan_in +
    fan_out)).  Gate biases start at zero except the forget gates, which
    start at one.  The draw order is fixed, so a seed pins every weight.
    """
    sizes = [int(h) for h in arch]
    if not sizes:
        raise ConfigError("architecture must list at least one hidden size")
    if any(h < 1 for h in sizes):
        raise ConfigError(f"hidden sizes must be positive, got {sizes}")
    rng = np.random.default_rng(seed)
    layers = []
    input_size = 1
    for hidden in sizes:
        bound_w = math.sqrt(6.0 / (input_size + hidden))
        bound_u = math.sqrt(6.0 / (hidden + hidden))
        W = np.concatenate([rng.uniform(-bound_w, bound_w, (hidden, input_size))
                            for _ in GATE_ORDER])
        U = np.concatenate([rng.uniform(-bound_u, bound_u, (hidden, hidden))
                            for _ in GATE_ORDER])
        b = np.zeros(4 * hidden)
        b[hidden:2 * hidden] = 1.0  # forget gate bias
        layers.append(LstmLayerParams(W=W, U=U, b=b))
        input_size = hidden
    bound_head = math.sqrt(6.0 / (input_size + 1))
    head = DenseParams(w=rng.uniform(-bound_head, bound_head, input_size), b=np.zeros(1))
    return LstmModel(layers=layers, head=head, window_width=int(window_width))


@dataclass(eq=False)
class _LayerCache:
    layer: LstmLayerParams
    x: np.ndarray        # (batch, steps, input)
    gates: np.ndarray    # (batch, steps, 4*hidden), post-activation, gate order
    c: np.ndarray        # (batch, steps, hidden)
    tanh_c: np.ndarray
    h: np.ndarray
    h0: np.ndarray
    c0: np.ndarray


def lstm_forward(layer: LstmLayerParams, inputs, h0=None, c0=None):
    """Run the gate recurrence over a batch of sequences.

    ``inputs`` is (batch, steps, input_size); ``h0``/``c0`` default to
    zeros of shape (batch, hidden).  Returns the hidden sequence
    (batch, steps, hidden), the final cell state, and the cache needed by
    ``_lstm_backward``.
    """
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 3 or x.shape[2] != layer.input_size:
        raise ShapeError(f"inputs must be (batch, steps, {layer.input_size}), "
                         f"got shape {np.shape(inputs)}")
    batch, steps, _ = x.shape
    hidden = layer.hidden_size
    if h0 is None:
        h0 = np.zeros((batch, hidden))
    if c0 is None:
        c0 = np.zeros((batch, hidden))
    h0 = np.asarray(h0, dtype=np.float64)
    c0 = np.asarray(c0, dtype=np.float64)
    if h0.shape != (batch, hidden) or c0.shape != (batch, hidden):
        raise ShapeError(f"initial state must be ({batch}, {hidden})")

    si, sf, sg, so = _gate_slices(hidden)
    Wt, Ut = layer.W.T, layer.U.T
    gates = np.empty((batch, steps, 4 * hidden))
    cs = np.empty((batch, steps, hidden))
    tanh_cs = np.empty((batch, steps, hidden))
    hs = np.empty((batch, steps, hidden))

    h, c = h0, c0
    for t in range(steps):
        z = x[:, t] @ Wt + h @ Ut + layer.b
        gate_i = _sigmoid(z[:, si])
        gate_f = _sigmoid(z[:, sf])
        gate_g = np.tanh(z[:, sg])
        gate_o = _sigmoid(z[:, so])
        c = gate_f * c + gate_i * gate_g
        tc = np.tanh(c)
        h = gate_o * tc
        gates[:, t, si] = gate_i
        gates[:, t, sf] = gate_f
        gates[:, t, sg] = gate_g
        gates[:, t, so] = gate_o
        cs[:, t] = c
        tanh_cs[:, t] = tc
        hs[:, t] = h

    cache = _LayerCache(layer=layer, x=x, gates=gates, c=cs, tanh_c=tanh_cs,
                        h=hs, h0=h0, c0=c0)
    return hs, c, cache


def _lstm_backward(cache: _LayerCache, dh_seq: np.ndarray):
    """Exact gradients for one layer given dLoss/dh at every step.

    Returns (dLoss/dx, dW, dU, db); dx feeds the layer below.
    """
    layer = cache.layer
    hidden = layer.hidden_size
    batch, steps, _ = cache.x.shape
    si, sf, sg, so = _gate_slices(hidden)

    dW = np.zeros_like(layer.W)
    dU = np.zeros_like(layer.U)
    db = np.zeros_like(layer.b)
    dx = np.empty_like(cache.x)
    dz = np.empty((batch, 4 * hidden))
    dh_next = np.zeros((batch, hidden))
    dc_next = np.zeros((batch, hidden))

    for t in range(steps - 1, -1, -1):
        gate_i = cache.gates[:, t, si]
        gate_f = cache.gates[:, t, sf]
        gate_g = cache.gates[:, t, sg]
        gate_o = cache.gates[:, t, so]
        tc = cache.tanh_c[:, t]
        c_prev = cache.c[:, t - 1] if t > 0 else cache.c0
        h_prev = cache.h[:, t - 1] if t > 0 else cache.h0

        dh = dh_seq[:, t] + dh_next
        do = dh * tc
        dc = dc_next + dh * gate_o * (1.0 - tc * tc)
        dz[:, si] = (dc * gate_g) * gate_i * (1.0 - gate_i)
        dz[:, sf] = (dc * c_prev) * gate_f * (1.0 - gate_f)
        dz[:, sg] = (dc * gate_i) * (1.0 - gate_g * gate_g)
        dz[:, so] = do * gate_o * (1.0 - gate_o)
        dc_next = dc * gate_f

        dW += dz.T @ cache.x[:, t]
        dU += dz.T @ h_prev
        db += dz.sum(axis=0)
        dx[:, t] = dz @ layer.W
        dh_next = dz @ layer.U

    return dx, dW, dU, db


@dataclass(eq=False)
class _ModelCache:
    model: LstmModel
    layer_caches: list[_LayerCache]
    h_last: np.ndarray  # (batch, hidden) final hidden state of the top layer
    batch: int
    steps: int


def _model_forward_batch(model: LstmModel, windows) -> tuple[np.ndarray, _ModelCache]:
    """Predict one step ahead for a batch of windows, shape (batch, width)."""
    x = np.asarray(windows, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.window_width:
        raise ShapeError(f"windows must be (batch, {model.window_width}), "
                         f"got shape {np.shape(windows)}")
    if not np.isfinite(x).all():
        raise DomainError("window values must be finite")
    if model.normalization is not None:
        mean, std = model.normalization
        x = (x - mean) / std

    seq = x[:, :, None]
    layer_caches = []
    for layer in model.layers:
        seq, _, cache = lstm_forward(layer, seq)
        layer_caches.append(cache)
    h_last = seq[:, -1, :]
    preds = h_last @ model.head.w + model.head.b[0]
    if model.normalization is not None:
        mean, std = model.normalization
        preds = preds * std + mean
    if not np.isfinite(preds).all():
        raise NumericError("model produced a non-finite prediction")
    return preds, _ModelCache(model=model, layer_caches=layer_caches, h_last=h_last,
                              batch=x.shape[0], steps=x.shape[1])


def model_forward(model: LstmModel, window) -> tuple[float, _ModelCache]:
    """Scalar prediction (mm) for one window of ``model.window_width`` values."""
    w = np.asarray(window, dtype=np.float64)
    if w.ndim != 1:
        raise ShapeError(f"window must be one-dimensional, got shape {w.shape}")
    preds, cache = _model_forward_batch(model, w[None, :])
    return float(preds[0]), cache


def backward(model: LstmModel, cache: _ModelCache, dloss_dpred) -> ModelGradients:
    """Exact gradients of the scalar loss w.r.t. every model parameter.

    ``dloss_dpred`` is the loss gradient at the prediction; for a batched
    cache pass one value per batch row (gradients are summed over rows).
    """
    if cache.model is not model:
        raise CacheError("cache was produced by a different model")
    d = np.asarray(dloss_dpred, dtype=np.float64).reshape(-1)
    if d.shape == (1,) and cache.batch > 1:
        d = np.full(cache.batch, d[0])
    if d.shape != (cache.batch,):
        raise ShapeError(f"dloss_dpred must be scalar or length {cache.batch}")
    if model.normalization is not None:
        d = d * model.normalization[1]  # output de-normalization pass-through

    head_w_grad = cache.h_last.T @ d
    head_b_grad = np.array([d.sum()])
    dh_seq = np.zeros((cache.batch, cache.steps, model.layers[-1].hidden_size))
    dh_seq[:, -1, :] = d[:, None] * model.head.w[None, :]

    layer_grads: list[LstmLayerParams | None] = [None] * len(model.layers)
    for index in range(len(model.layers) - 1, -1, -1):
        dh_seq, dW, dU, db = _lstm_backward(cache.layer_caches[index], dh_seq)
        layer_grads[index] = LstmLayerParams(W=dW, U=dU, b=db)
    return ModelGradients(layers=layer_grads, head=DenseParams(w=head_w_grad, b=head_b_grad))


def zero_gradients(model: LstmModel) -> ModelGradients:
    """All-zero gradient container matching ``model``."""
    layers = [LstmLayerParams(W=np.zeros_like(l.W), U=np.zeros_like(l.U),
                              b=np.zeros_like(l.b)) for l in model.layers]
    head = DenseParams(w=np.zeros_like(model.head.w), b=np.zeros_like(model.head.b))
    return ModelGradients(layers=layers, head=head)


def with_normalization(model: LstmModel, mean: float, std: float) -> LstmModel:
    return replace(model, normalization=(float(mean), float(std)))
