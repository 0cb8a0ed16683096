"""Minimal binary (P5) PGM reader/writer; 16-bit output, 8/16-bit input."""

from __future__ import annotations

import numpy as np

MAXVAL_16 = 65535


def write_pgm16(path, values: np.ndarray) -> None:
    """Write a 2D uint16 array as a binary P5 PGM with maxval 65535."""
    arr = np.asarray(values)
    if arr.ndim != 2:
        raise ValueError("PGM payload must be a 2D array")
    if arr.dtype != np.uint16:
        if np.any(arr < 0) or np.any(arr > MAXVAL_16):
            raise ValueError("values outside the 16-bit range; normalize before writing")
        arr = np.round(arr).astype(np.uint16)
    rows, cols = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{cols} {rows}\n{MAXVAL_16}\n".encode("ascii"))
        fh.write(arr.astype(">u2").tobytes())


def read_pgm(path) -> np.ndarray:
    """Read a binary P5 PGM into a uint8 or uint16 array."""
    with open(path, "rb") as fh:
        data = fh.read()
    magic, rest = _token(data)
    if magic != b"P5":
        raise ValueError(f"{path}: not a binary PGM (magic {magic!r})")
    cols, rest = _token(rest)
    rows, rest = _token(rest)
    maxval, rest = _token(rest)
    cols, rows, maxval = int(cols), int(rows), int(maxval)
    if maxval <= 0 or maxval > MAXVAL_16:
        raise ValueError(f"{path}: invalid maxval {maxval}")
    # exactly one whitespace byte separates the header from the raster
    raster = rest[1:]
    dtype = ">u2" if maxval > 255 else "u1"
    count = rows * cols
    expected = count * np.dtype(dtype).itemsize
    if len(raster) < expected:
        raise ValueError(f"{path}: truncated raster ({len(raster)} < {expected} bytes)")
    arr = np.frombuffer(raster[:expected], dtype=dtype).reshape(rows, cols)
    return arr.astype(np.uint16 if maxval > 255 else np.uint8)


def _token(data: bytes) -> tuple[bytes, bytes]:
    """Next header token, skipping whitespace and # comments."""
    i = 0
    while i < len(data):
        c = data[i : i + 1]
        if c == b"#":
            j = data.find(b"\n", i)
            i = len(data) if j < 0 else j + 1
        elif c.isspace():
            i += 1
        else:
            break
    j = i
    while j < len(data) and not data[j : j + 1].isspace():
        j += 1
    if j == i:
        raise ValueError("unexpected end of PGM header")
    return data[i:j], data[j:]
