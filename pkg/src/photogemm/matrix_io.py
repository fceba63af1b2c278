"""Matrix files: CSV of decimal reals, or a small binary container.

Binary layout: the 8-byte magic ``LMHPMAT1``, rows and cols as little-endian
uint64, then ``rows * cols`` little-endian binary64 values in row-major order.
"""
from __future__ import annotations

import struct
from pathlib import Path
from typing import Union

import numpy as np

from .bfp import as_real_matrix
from .errors import InvalidValue

MAGIC = b"LMHPMAT1"
BINARY_SUFFIXES = (".bin", ".lmhp")

PathLike = Union[str, Path]


def read_matrix(path: PathLike) -> np.ndarray:
    path = Path(path)
    data = path.read_bytes()
    if data[:8] == MAGIC:
        if len(data) < 24:
            raise InvalidValue(f"{path}: truncated header")
        rows, cols = struct.unpack("<QQ", data[8:24])
        expected = 24 + 8 * rows * cols
        if len(data) != expected:
            raise InvalidValue(f"{path}: expected {expected} bytes for {rows}x{cols}, got {len(data)}")
        values = np.frombuffer(data, dtype="<f8", offset=24).astype(np.float64)
        return as_real_matrix(values.reshape(rows, cols), str(path))
    try:
        text = data.decode("utf-8")
        rows = [
            [float(v) for v in line.replace(";", ",").split(",")]
            for line in text.splitlines()
            if line.strip() and not line.lstrip().startswith("#")
        ]
    except ValueError as exc:
        raise InvalidValue(f"{path}: not a numeric CSV matrix ({exc})") from exc
    if not rows or len({len(r) for r in rows}) != 1:
        raise InvalidValue(f"{path}: rows have differing lengths or file is empty")
    return as_real_matrix(np.array(rows), str(path))


def write_matrix(path: PathLike, matrix, binary: bool = None) -> None:
    """Write ``matrix``; binary when ``binary`` is set or the suffix is ``.bin``/``.lmhp``."""
    path = Path(path)
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2:
        raise InvalidValue(f"matrix must be 2-D, got shape {m.shape}")
    if binary is None:
        binary = path.suffix.lower() in BINARY_SUFFIXES
    if binary:
        path.write_bytes(MAGIC + struct.pack("<QQ", *m.shape) + m.astype("<f8").tobytes())
    else:
        lines = [",".join(repr(float(v)) for v in row) for row in m]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
