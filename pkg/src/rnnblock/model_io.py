"""Model configuration, deterministic generation, and binary serialization.

Weights and input sequences are generated from a single SplitMix64 stream
and the top-24-bit uniform transform, so any implementation of the same
recipe produces byte-identical data. The binary formats below are
deliberately dumb: little-endian, fixed headers, row-major payloads.

Weight file ("RNNW"), 16-byte header then one block per layer::

    magic      4s   "RNNW"
    version    u32  1
    kind       u8   0=LSTM 1=SRU 2=QRNN
    precision  u8   0=f32 1=f64
    reserved   u16  0
    n_layers   u32
    per layer: d_in u32, d_h u32, then the layer's matrices and bias
    vectors in canonical order, row-major.

Sequence file ("RNNX"), 20-byte header::

    magic      4s   "RNNX"
    version    u32  1
    precision  u8   0=f32 1=f64
    reserved   u8 + u16  0
    seq_len    u32
    width      u32
    then seq_len x width elements, row-major.

Canonical weight order per layer (matches field order of the weight
dataclasses): LSTM w_forget, w_input, w_output, w_cand, u_forget, u_input,
u_output, u_cand, b_forget, b_input, b_output, b_cand; SRU w_cand,
w_forget, w_highway, b_forget, b_highway; QRNN w_cand, w_cand_prev,
w_forget, w_forget_prev, w_out, w_out_prev.
"""

import dataclasses
import struct
from dataclasses import dataclass, field

import numpy as np

from .cells import CellKind, LstmWeights, QrnnWeights, SruWeights
from .kernels import PRECISIONS, raw_stream, uniform_array

_WEIGHT_MAGIC = b"RNNW"
_SEQ_MAGIC = b"RNNX"
_FORMAT_VERSION = 1

_KIND_CODES = {CellKind.LSTM: 0, CellKind.SRU: 1, CellKind.QRNN: 2}
_KIND_FROM_CODE = {v: k for k, v in _KIND_CODES.items()}
_PREC_CODES = {"f32": 0, "f64": 1}
_PREC_FROM_CODE = {v: k for k, v in _PREC_CODES.items()}


class FileFormatError(ValueError):
    """Base class for serialization errors."""


class BadMagicError(FileFormatError):
    pass


class UnsupportedVersionError(FileFormatError):
    pass


class TruncatedFileError(FileFormatError):
    pass


class ShapeConsistencyError(FileFormatError):
    pass


@dataclass(frozen=True)
class RnnConfig:
    kind: CellKind
    d_in: int
    d_h: int
    n_layers: int = 1
    precision: str = "f32"

    def __post_init__(self):
        if self.d_in < 1 or self.d_h < 1:
            raise ValueError("d_in and d_h must be >= 1")
        if self.n_layers < 1:
            raise ValueError("n_layers must be >= 1")
        if self.precision not in PRECISIONS:
            raise ValueError(f"precision must be one of {sorted(PRECISIONS)}")
        if self.kind is CellKind.SRU and self.d_in != self.d_h:
            raise ValueError("SRU requires d_in == d_h")

    @property
    def dtype(self):
        return PRECISIONS[self.precision]

    def layer_dims(self, layer: int) -> tuple:
        """(d_in, d_h) of the given layer; stacked layers read width d_h."""
        return (self.d_in if layer == 0 else self.d_h, self.d_h)


@dataclass
class WeightSet:
    kind: CellKind
    precision: str
    layers: list = field(default_factory=list)

    @property
    def dtype(self):
        return PRECISIONS[self.precision]


# width presets reproducing the benchmark dimensioning: LSTM 350/700 and
# SRU 512/1024 give roughly matched parameter counts (about 1M and 3M);
# QRNN reuses the SRU widths
PRESETS = {
    "lstm-small": (CellKind.LSTM, 350),
    "lstm-large": (CellKind.LSTM, 700),
    "sru-small": (CellKind.SRU, 512),
    "sru-large": (CellKind.SRU, 1024),
    "qrnn-small": (CellKind.QRNN, 512),
    "qrnn-large": (CellKind.QRNN, 1024),
}


def preset_config(name: str, precision: str = "f32", n_layers: int = 1) -> RnnConfig:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; expected one of {sorted(PRESETS)}")
    kind, width = PRESETS[name]
    return RnnConfig(kind=kind, d_in=width, d_h=width, n_layers=n_layers, precision=precision)


def _layer_spec(kind: CellKind, d_in: int, d_h: int):
    """Canonical (shape, ...) list for one layer of the given kind."""
    if kind is CellKind.LSTM:
        return ([(d_h, d_in)] * 4) + ([(d_h, d_h)] * 4) + ([(d_h,)] * 4)
    if kind is CellKind.SRU:
        return ([(d_h, d_in)] * 3) + ([(d_h,)] * 2)
    return [(d_h, d_in)] * 6


_LAYER_CLASS = {
    CellKind.LSTM: LstmWeights,
    CellKind.SRU: SruWeights,
    CellKind.QRNN: QrnnWeights,
}


def count_params(cfg: RnnConfig) -> int:
    total = 0
    for layer in range(cfg.n_layers):
        d_in, d_h = cfg.layer_dims(layer)
        total += sum(int(np.prod(s)) for s in _layer_spec(cfg.kind, d_in, d_h))
    return total


def generate_weights(cfg: RnnConfig, seed: int) -> WeightSet:
    """Fill every parameter from one SplitMix64 stream, in canonical order.

    Matrices are filled row-major. The transform runs in float64 and is
    then cast to the storage precision, so the bytes are reproducible
    across implementations.
    """
    raws = raw_stream(seed, count_params(cfg))
    values = uniform_array(raws)
    dtype = cfg.dtype
    layers = []
    pos = 0
    for layer in range(cfg.n_layers):
        d_in, d_h = cfg.layer_dims(layer)
        arrays = []
        for shape in _layer_spec(cfg.kind, d_in, d_h):
            n = int(np.prod(shape))
            arrays.append(values[pos:pos + n].astype(dtype).reshape(shape))
            pos += n
        layers.append(_LAYER_CLASS[cfg.kind](*arrays))
    return WeightSet(kind=cfg.kind, precision=cfg.precision, layers=layers)


def generate_sequence(seq_len: int, width: int, seed: int, precision: str = "f32") -> np.ndarray:
    """Input matrix [seq_len x width]; row t is x_t. Seed it independently
    of the weights."""
    if seq_len < 1 or width < 1:
        raise ValueError("seq_len and width must be >= 1")
    if precision not in PRECISIONS:
        raise ValueError(f"precision must be one of {sorted(PRECISIONS)}")
    values = uniform_array(raw_stream(seed, seq_len * width))
    return values.astype(PRECISIONS[precision]).reshape(seq_len, width)


# ---------------------------------------------------------------------------
# serialization


def _element_dtype(precision: str):
    return np.dtype("<f4") if precision == "f32" else np.dtype("<f8")


def save_weights(ws: WeightSet, path) -> None:
    with open(path, "wb") as f:
        f.write(struct.pack("<4sIBBHI", _WEIGHT_MAGIC, _FORMAT_VERSION,
                            _KIND_CODES[ws.kind], _PREC_CODES[ws.precision],
                            0, len(ws.layers)))
        dt = _element_dtype(ws.precision)
        for layer in ws.layers:
            f.write(struct.pack("<II", layer.d_in, layer.d_h))
            for fld in dataclasses.fields(layer):
                arr = getattr(layer, fld.name)
                f.write(np.ascontiguousarray(arr, dtype=dt).tobytes())


def _read_exact(f, n: int, what: str) -> bytes:
    buf = f.read(n)
    if len(buf) != n:
        raise TruncatedFileError(f"file ends inside {what} ({len(buf)} of {n} bytes)")
    return buf


def _remaining_size(f) -> int:
    pos = f.tell()
    f.seek(0, 2)
    end = f.tell()
    f.seek(pos)
    return end - pos


def load_weights(path) -> WeightSet:
    with open(path, "rb") as f:
        header = _read_exact(f, 16, "header")
        magic, version, kind_code, prec_code, _, n_layers = struct.unpack("<4sIBBHI", header)
        if magic != _WEIGHT_MAGIC:
            raise BadMagicError(f"bad magic {magic!r}, expected {_WEIGHT_MAGIC!r}")
        if version != _FORMAT_VERSION:
            raise UnsupportedVersionError(f"format version {version}, expected {_FORMAT_VERSION}")
        if kind_code not in _KIND_FROM_CODE:
            raise ShapeConsistencyError(f"unknown cell kind code {kind_code}")
        if prec_code not in _PREC_FROM_CODE:
            raise ShapeConsistencyError(f"unknown precision code {prec_code}")
        if n_layers < 1:
            raise ShapeConsistencyError("layer count must be >= 1")
        kind = _KIND_FROM_CODE[kind_code]
        precision = _PREC_FROM_CODE[prec_code]
        dt = _element_dtype(precision)
        layers = []
        prev_d_h = None
        for li in range(n_layers):
            d_in, d_h = struct.unpack("<II", _read_exact(f, 8, f"layer {li} header"))
            if d_in < 1 or d_h < 1:
                raise ShapeConsistencyError(f"layer {li} has zero dimension")
            if kind is CellKind.SRU and d_in != d_h:
                raise ShapeConsistencyError("SRU layer must have d_in == d_h")
            if prev_d_h is not None and d_in != prev_d_h:
                raise ShapeConsistencyError(f"layer {li} input width {d_in} does not "
                                            f"match previous layer width {prev_d_h}")
            prev_d_h = d_h
            spec = _layer_spec(kind, d_in, d_h)
            payload = sum(int(np.prod(s)) for s in spec) * dt.itemsize
            # size check before any allocation so a lying header cannot
            # trigger a huge read
            if _remaining_size(f) < payload:
                raise TruncatedFileError(f"layer {li} payload incomplete")
            arrays = []
            for shape in spec:
                n = int(np.prod(shape))
                buf = _read_exact(f, n * dt.itemsize, f"layer {li} data")
                arrays.append(np.frombuffer(buf, dtype=dt).astype(
                    PRECISIONS[precision], copy=False).reshape(shape).copy())
            layers.append(_LAYER_CLASS[kind](*arrays))
        if f.read(1):
            raise ShapeConsistencyError("trailing bytes after final layer")
    return WeightSet(kind=kind, precision=precision, layers=layers)


def save_sequence(X: np.ndarray, path) -> None:
    if X.ndim != 2:
        raise ValueError("sequence must be a 2-d array")
    precision = "f32" if X.dtype == np.float32 else "f64"
    if X.dtype not in (np.float32, np.float64):
        raise ValueError(f"unsupported dtype {X.dtype}")
    with open(path, "wb") as f:
        f.write(struct.pack("<4sIBBHII", _SEQ_MAGIC, _FORMAT_VERSION,
                            _PREC_CODES[precision], 0, 0, X.shape[0], X.shape[1]))
        f.write(np.ascontiguousarray(X, dtype=_element_dtype(precision)).tobytes())


def load_sequence(path) -> np.ndarray:
    with open(path, "rb") as f:
        header = _read_exact(f, 20, "header")
        magic, version, prec_code, _, _, seq_len, width = struct.unpack("<4sIBBHII", header)
        if magic != _SEQ_MAGIC:
            raise BadMagicError(f"bad magic {magic!r}, expected {_SEQ_MAGIC!r}")
        if version != _FORMAT_VERSION:
            raise UnsupportedVersionError(f"format version {version}, expected {_FORMAT_VERSION}")
        if prec_code not in _PREC_FROM_CODE:
            raise ShapeConsistencyError(f"unknown precision code {prec_code}")
        if seq_len < 1 or width < 1:
            raise ShapeConsistencyError("sequence dimensions must be >= 1")
        precision = _PREC_FROM_CODE[prec_code]
        dt = _element_dtype(precision)
        payload = seq_len * width * dt.itemsize
        if _remaining_size(f) != payload:
            got = _remaining_size(f)
            if got < payload:
                raise TruncatedFileError(f"payload incomplete ({got} of {payload} bytes)")
            raise ShapeConsistencyError("trailing bytes after payload")
        buf = _read_exact(f, payload, "payload")
    return np.frombuffer(buf, dtype=dt).astype(
        PRECISIONS[precision], copy=False).reshape(seq_len, width).copy()
