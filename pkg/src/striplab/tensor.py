"""Dense tensor substrate.

Tensors are plain float64 ``numpy.ndarray`` objects in C (row-major) order.
Every function here checks shapes explicitly and never broadcasts unless it
says so.
"""

from __future__ import annotations

import io
import os
from typing import BinaryIO

import numpy as np

MAGIC = "TSR1"


class ShapeError(ValueError):
    """Raised when operand shapes do not satisfy an operation's contract."""


class ZeroNormError(ValueError):
    """Raised when a direction is requested for a zero vector."""


class TensorFormatError(ValueError):
    """Raised for malformed TSR1 files."""


def as_tensor(x, ndim: int | None = None, name: str = "x") -> np.ndarray:
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if ndim is not None and arr.ndim != ndim:
        raise ShapeError(f"{name}: expected {ndim}-d tensor, got shape {arr.shape}")
    if any(n < 1 for n in arr.shape):
        raise ShapeError(f"{name}: empty extent in shape {arr.shape}")
    return arr


def matmul(a, b) -> np.ndarray:
    a = as_tensor(a, 2, "a")
    b = as_tensor(b, 2, "b")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner extents differ, {a.shape} x {b.shape}")
    return a @ b


def softmax_rows(x) -> np.ndarray:
    """Row-wise softmax with max subtraction."""
    x = as_tensor(x, 2)
    z = x - x.max(axis=1, keepdims=True)
    np.exp(z, out=z)
    z /= z.sum(axis=1, keepdims=True)
    return z


def sigmoid(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    # exp only ever sees non-positive arguments, so neither branch overflows
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def gap_spatial(x) -> np.ndarray:
    """Per-channel mean over the H x W plane of a C x H x W tensor."""
    x = as_tensor(x, 3)
    return x.mean(axis=(1, 2))


def cosine_similarity(a, b) -> float:
    a = as_tensor(a, 1, "a")
    b = as_tensor(b, 1, "b")
    if a.shape != b.shape:
        raise ShapeError(f"cosine_similarity: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ZeroNormError("cosine_similarity of a zero-norm vector is undefined")
    return float(np.dot(a, b) / (na * nb))


# -- TSR1 file format ----------------------------------------------------------

def dump_tsr(x, fh: BinaryIO) -> None:
    x = np.ascontiguousarray(x, dtype="<f8")
    header = " ".join([MAGIC, str(x.ndim), *map(str, x.shape)]) + "\n"
    fh.write(header.encode("ascii"))
    fh.write(x.tobytes(order="C"))


def load_tsr(fh: BinaryIO) -> np.ndarray:
    line = fh.readline()
    try:
        parts = line.decode("ascii").split()
    except UnicodeDecodeError as exc:
        raise TensorFormatError("header is not ASCII") from exc
    if not parts or parts[0] != MAGIC:
        raise TensorFormatError(f"bad magic {parts[:1]!r}")
    try:
        ndim = int(parts[1])
        shape = tuple(int(p) for p in parts[2:])
    except (IndexError, ValueError) as exc:
        raise TensorFormatError(f"bad header {line!r}") from exc
    if len(shape) != ndim or any(n < 1 for n in shape):
        raise TensorFormatError(f"header shape {shape} inconsistent with ndim {ndim}")
    count = int(np.prod(shape))
    payload = fh.read()
    if len(payload) != 8 * count:
        raise TensorFormatError(f"expected {8 * count} payload bytes, found {len(payload)}")
    return np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(shape)


def save(path: str | os.PathLike, x) -> None:
    with open(path, "wb") as fh:
        dump_tsr(x, fh)


def load(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        try:
            return load_tsr(fh)
        except TensorFormatError as exc:
            raise TensorFormatError(f"{os.fspath(path)}: {exc}") from exc


def to_bytes(x) -> bytes:
    buf = io.BytesIO()
    dump_tsr(x, buf)
    return buf.getvalue()


def from_bytes(data: bytes) -> np.ndarray:
    return load_tsr(io.BytesIO(data))
