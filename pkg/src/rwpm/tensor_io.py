"""RWTENSR1 binary tensors and the dense map layouts built on them.

Layout (all little-endian)::

    magic   8 bytes   b"RWTENSR1"
    dtype   u32       0 = binary32, 1 = unsigned 8-bit
    rank    u32
    dims    rank x u64
    payload row-major, last dimension fastest

Embedding maps are stored as [d, H, W], score maps as [H, W] real32,
label maps as [H, W] label8 with 0 = inlier, 1 = outlier, 255 = ignore.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO

import numpy as np

from .errors import (
    DegenerateRowError,
    SizeError,
    TensorDataError,
    TensorFormatError,
    TensorLengthError,
)

MAGIC = b"RWTENSR1"
REAL32 = "real32"
LABEL8 = "label8"

_DTYPE_CODES = {REAL32: 0, LABEL8: 1}
_CODE_DTYPES = {v: k for k, v in _DTYPE_CODES.items()}
_NUMPY_DTYPES = {REAL32: np.dtype("<f4"), LABEL8: np.dtype("u1")}

INLIER, OUTLIER, IGNORE = 0, 1, 255
LABEL_CODES = (INLIER, OUTLIER, IGNORE)

DEGENERATE_NORM = 1e-12


@dataclass(frozen=True)
class Tensor:
    dtype: str
    data: np.ndarray

    def __post_init__(self):
        if self.dtype not in _DTYPE_CODES:
            raise TensorFormatError(f"unknown dtype {self.dtype!r}")
        data = np.ascontiguousarray(self.data, dtype=_NUMPY_DTYPES[self.dtype])
        if data.ndim < 1 or min(data.shape) < 1:
            raise SizeError(f"tensor needs rank >= 1 and positive extents, got {data.shape}")
        if self.dtype == REAL32 and np.isnan(data).any():
            raise TensorDataError("real32 tensor contains NaN")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    @classmethod
    def real(cls, array) -> "Tensor":
        return cls(REAL32, np.asarray(array))

    @classmethod
    def labels(cls, array) -> "Tensor":
        return cls(LABEL8, np.asarray(array))


def write_tensor(t: Tensor, sink: BinaryIO) -> None:
    header = MAGIC + struct.pack("<II", _DTYPE_CODES[t.dtype], t.data.ndim)
    header += struct.pack(f"<{t.data.ndim}Q", *t.data.shape)
    sink.write(header)
    sink.write(t.data.tobytes(order="C"))


def read_tensor(source: BinaryIO) -> Tensor:
    magic = source.read(8)
    if magic != MAGIC:
        raise TensorFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    fixed = source.read(8)
    if len(fixed) != 8:
        raise TensorLengthError("truncated header")
    code, rank = struct.unpack("<II", fixed)
    if code not in _CODE_DTYPES:
        raise TensorFormatError(f"unknown dtype code {code}")
    if rank < 1:
        raise TensorFormatError("rank must be at least 1")
    raw_dims = source.read(8 * rank)
    if len(raw_dims) != 8 * rank:
        raise TensorLengthError("truncated dimension list")
    dims = struct.unpack(f"<{rank}Q", raw_dims)
    if min(dims) < 1:
        raise TensorFormatError(f"non-positive extent in {dims}")
    dtype = _CODE_DTYPES[code]
    np_dtype = _NUMPY_DTYPES[dtype]
    count = int(np.prod(dims, dtype=np.int64))
    payload = source.read(count * np_dtype.itemsize)
    if len(payload) != count * np_dtype.itemsize:
        got = len(payload) // np_dtype.itemsize
        raise TensorLengthError(f"declared {count} elements, {got} present")
    data = np.frombuffer(payload, dtype=np_dtype).reshape(dims)
    if dtype == REAL32 and np.isnan(data).any():
        raise TensorDataError("real32 payload contains NaN")
    return Tensor(dtype, data)


def tensor_bytes(t: Tensor) -> bytes:
    buf = io.BytesIO()
    write_tensor(t, buf)
    return buf.getvalue()


def save_tensor(path, t: Tensor) -> None:
    with open(path, "wb") as fh:
        write_tensor(t, fh)


def load_tensor(path) -> Tensor:
    with open(Path(path), "rb") as fh:
        return read_tensor(fh)


# --- typed views ----------------------------------------------------------

def check_embedding_map(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values)
    if values.ndim != 3 or min(values.shape) < 1:
        raise SizeError(f"embedding map must have dims [d, H, W], got {values.shape}")
    return values


def check_score_map(scores: np.ndarray) -> np.ndarray:
    scores = np.asarray(scores)
    if scores.ndim != 2:
        raise SizeError(f"score map must have dims [H, W], got {scores.shape}")
    if not np.isfinite(scores).all():
        raise TensorDataError("score map contains non-finite values")
    return scores


def check_label_map(labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise SizeError(f"label map must have dims [H, W], got {labels.shape}")
    bad = ~np.isin(labels, LABEL_CODES)
    if bad.any():
        raise TensorDataError(f"label map holds codes outside {LABEL_CODES}: {np.unique(labels[bad])}")
    return labels.astype(np.uint8, copy=False)


def to_pixel_matrix(values: np.ndarray) -> np.ndarray:
    """[d, H, W] -> [H*W, d]; row i is pixel (i // W, i % W)."""
    d, h, w = check_embedding_map(values).shape
    return values.reshape(d, h * w).T.copy()


def from_pixel_matrix(x: np.ndarray, height: int, width: int) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 2 or x.shape[0] != height * width:
        raise SizeError(f"pixel matrix {x.shape} does not fit a {height}x{width} map")
    return x.T.reshape(x.shape[1], height, width).copy()


def l2_normalize_rows(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    norms = np.linalg.norm(x, axis=1)
    small = np.flatnonzero(norms < DEGENERATE_NORM)
    if small.size:
        raise DegenerateRowError(int(small[0]), float(norms[small[0]]))
    return x / norms[:, None]
