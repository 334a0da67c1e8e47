"""Bit-exact model serialization.

Text format, one file per model:

    PWVLSTM 1
    layers=<h1,h2,...> window=<w> norm=<none|mu-hex,sigma-hex>
    <name> <rows> <cols>
    <hex> <hex> ...          (rows*cols doubles, row-major)
    ...

Every double is written as the 16-digit lowercase hex of its big-endian
IEEE-754 bit pattern, so save/load round-trips are bit-identical.  Blocks
appear per layer in gate order W_i W_f W_g W_o, U_i U_f U_g U_o,
b_i b_f b_g b_o, followed by the dense head blocks ``w`` and ``b``.
"""

from __future__ import annotations

import re
import struct

import numpy as np

from .errors import FormatError
from .lstm import GATE_ORDER, DenseParams, LstmLayerParams, LstmModel

MAGIC = "PWVLSTM 1"

_DESCRIPTOR_RE = re.compile(
    r"layers=(\d+(?:,\d+)*) window=(\d+) norm=(none|[0-9a-f]{16},[0-9a-f]{16})")
_HEX_RE = re.compile(r"[0-9a-f]{16}")


def _double_to_hex(value: float) -> str:
    return struct.pack(">d", float(value)).hex()


def _hex_to_double(token: str) -> float:
    if not _HEX_RE.fullmatch(token):
        raise FormatError(f"bad value token {token!r} (expected 16 lowercase hex digits)")
    return struct.unpack(">d", bytes.fromhex(token))[0]


def _iter_blocks(model: LstmModel):
    """(name, 2-d array) blocks in the canonical file order."""
    for layer in model.layers:
        h = layer.hidden_size
        for k, gate in enumerate(GATE_ORDER):
            yield f"W_{gate}", layer.W[k * h:(k + 1) * h]
        for k, gate in enumerate(GATE_ORDER):
            yield f"U_{gate}", layer.U[k * h:(k + 1) * h]
        for k, gate in enumerate(GATE_ORDER):
            yield f"b_{gate}", layer.b[k * h:(k + 1) * h].reshape(1, h)
    yield "w", model.head.w.reshape(1, -1)
    yield "b", model.head.b.reshape(1, 1)


def save_model(model: LstmModel, path) -> None:
    """Write ``model`` to ``path`` in the documented text format."""
    arch = ",".join(str(h) for h in model.hidden_sizes)
    if model.normalization is None:
        norm = "none"
    else:
        mean, std = model.normalization
        norm = f"{_double_to_hex(mean)},{_double_to_hex(std)}"
    lines = [MAGIC, f"layers={arch} window={model.window_width} norm={norm}"]
    for name, block in _iter_blocks(model):
        rows, cols = block.shape
        lines.append(f"{name} {rows} {cols}")
        for row in block:
            lines.append(" ".join(_double_to_hex(v) for v in row))
    with open(path, "w") as handle:
        handle.write("\n".join(lines) + "\n")


class _TokenStream:
    def __init__(self, text: str):
        self._tokens = text.split()
        self._pos = 0

    def next(self, what: str) -> str:
        if self._pos >= len(self._tokens):
            raise FormatError(f"unexpected end of file while reading {what}")
        token = self._tokens[self._pos]
        self._pos += 1
        return token

    def exhausted(self) -> bool:
        return self._pos >= len(self._tokens)


def _read_block(stream: _TokenStream, expect_name: str, expect_shape: tuple[int, int]) -> np.ndarray:
    name = stream.next("block header")
    if name != expect_name:
        raise FormatError(f"expected block {expect_name!r}, found {name!r}")
    try:
        rows = int(stream.next("row count"))
        cols = int(stream.next("column count"))
    except ValueError as exc:
        raise FormatError(f"block {expect_name!r}: non-integer shape") from exc
    if (rows, cols) != expect_shape:
        raise FormatError(f"block {expect_name!r}: shape {(rows, cols)} does not match "
                          f"architecture descriptor {expect_shape}")
    values = np.empty(rows * cols)
    for k in range(rows * cols):
        values[k] = _hex_to_double(stream.next(f"value in block {expect_name!r}"))
    if not np.isfinite(values).all():
        raise FormatError(f"block {expect_name!r} contains non-finite values")
    return values.reshape(rows, cols)


def load_model(path) -> LstmModel:
    """Read a model file back; inverse of ``save_model``, bit for bit."""
    with open(path, "r") as handle:
        first = handle.readline().rstrip("\n")
        if first != MAGIC:
            raise FormatError(f"bad magic line {first!r} (expected {MAGIC!r})")
        descriptor = handle.readline().rstrip("\n")
        match = _DESCRIPTOR_RE.fullmatch(descriptor)
        if match is None:
            raise FormatError(f"bad architecture descriptor {descriptor!r}")
        rest = handle.read()

    hidden_sizes = [int(h) for h in match.group(1).split(",")]
    window_width = int(match.group(2))
    if match.group(3) == "none":
        normalization = None
    else:
        mean_hex, std_hex = match.group(3).split(",")
        mean = _hex_to_double(mean_hex)
        std = _hex_to_double(std_hex)
        if not (np.isfinite(mean) and np.isfinite(std) and std > 0):
            raise FormatError(f"invalid normalization constants ({mean!r}, {std!r})")
        normalization = (mean, std)

    stream = _TokenStream(rest)
    layers = []
    input_size = 1
    for hidden in hidden_sizes:
        w_parts = [_read_block(stream, f"W_{g}", (hidden, input_size)) for g in GATE_ORDER]
        u_parts = [_read_block(stream, f"U_{g}", (hidden, hidden)) for g in GATE_ORDER]
        b_parts = [_read_block(stream, f"b_{g}", (1, hidden)) for g in GATE_ORDER]
        layers.append(LstmLayerParams(W=np.concatenate(w_parts),
                                      U=np.concatenate(u_parts),
                                      b=np.concatenate([p[0] for p in b_parts])))
        input_size = hidden
    head_w = _read_block(stream, "w", (1, input_size))
    head_b = _read_block(stream, "b", (1, 1))
    if not stream.exhausted():
        raise FormatError("trailing data after the last parameter block")
    return LstmModel(layers=layers, head=DenseParams(w=head_w[0], b=head_b[0]),
                     window_width=window_width, normalization=normalization)
