"""Binary container for an embedding matrix with optional class labels.

Layout, all little-endian:

    bytes 0-3    magic "EMB1"
    bytes 4-7    n rows, unsigned 32-bit
    bytes 8-11   d columns, unsigned 32-bit
    then         n*d float32 values, row-major
    optional     marker "LBL1" + n unsigned 32-bit class ids

The file size is validated exactly against the header, so truncation and
trailing garbage are both detected. Values are float32 on disk and float64 in
memory; writes go through a temp file and an atomic rename.
"""

from __future__ import annotations

import os
import struct
import tempfile

import numpy as np

from .numerics import as_matrix

__all__ = ["MAGIC", "LABEL_MAGIC", "write_embeddings", "read_embeddings", "atomic_write_bytes"]

MAGIC = b"EMB1"
LABEL_MAGIC = b"LBL1"
_HEADER = struct.Struct("<4sII")


def atomic_write_bytes(path, data: bytes) -> None:
    """Write a file via temp + rename so readers never see a partial file."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_embeddings(path, matrix, labels=None) -> None:
    """Serialize a matrix (and optional labels) to the EMB1 container."""
    m = as_matrix(matrix)
    n, d = m.shape
    blob = bytearray(_HEADER.pack(MAGIC, n, d))
    blob += m.astype("<f4").tobytes(order="C")
    if labels is not None:
        labels = np.asarray(labels)
        if labels.ndim != 1 or labels.shape[0] != n:
            raise ValueError(f"labels must be a vector of length {n}")
        if not np.issubdtype(labels.dtype, np.integer):
            raise ValueError(f"labels must be integers, got dtype {labels.dtype}")
        if labels.min() < 0 or labels.max() > 0xFFFFFFFF:
            raise ValueError("labels must fit in an unsigned 32-bit integer")
        blob += LABEL_MAGIC
        blob += labels.astype("<u4").tobytes(order="C")
    atomic_write_bytes(path, bytes(blob))


def read_embeddings(path) -> tuple[np.ndarray, np.ndarray | None]:
    """Read an EMB1 file back as (float64 matrix, labels or None)."""
    path = os.fspath(path)
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < _HEADER.size:
        raise ValueError(f"{path}: truncated header ({len(blob)} bytes)")
    magic, n, d = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if n < 1 or d < 1:
        raise ValueError(f"{path}: invalid shape {n}x{d}")

    body = _HEADER.size + 4 * n * d
    with_labels = body + len(LABEL_MAGIC) + 4 * n
    if len(blob) == body:
        labels = None
    elif len(blob) == with_labels:
        if blob[body:body + 4] != LABEL_MAGIC:
            raise ValueError(f"{path}: bad label marker {blob[body:body + 4]!r}")
        labels = np.frombuffer(blob, dtype="<u4", count=n, offset=body + 4).astype(np.int64)
    else:
        raise ValueError(
            f"{path}: size {len(blob)} matches neither {body} (no labels) nor {with_labels} (labels)"
        )
    matrix = np.frombuffer(blob, dtype="<f4", count=n * d, offset=_HEADER.size)
    matrix = matrix.reshape(n, d).astype(np.float64)
    if not np.all(np.isfinite(matrix)):
        raise ValueError(f"{path}: payload contains non-finite values")
    return matrix, labels
