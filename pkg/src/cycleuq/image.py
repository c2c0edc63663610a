"""Dense 2D grayscale images and their norms.

Images are plain float64 numpy arrays in row-major order, nominally in
[0, 1] (not enforced after arithmetic). All operations are pure and
return new arrays, so values can be shared freely between workers.
"""

import struct

import numpy as np

from .exceptions import DataError
from .validation import as_image, check_same_shape

RAW_MAGIC = b"CGF1"
PGM_MAXVAL = 65535


def l2_norm(a) -> float:
    """Euclidean norm over all pixels."""
    arr = as_image(a)
    return float(np.sqrt(np.sum(arr * arr)))


def diff_norm(a, b) -> float:
    """l2_norm(a - b); symmetric in its arguments."""
    arr_a = as_image(a)
    arr_b = as_image(b)
    check_same_shape(arr_a, arr_b)
    d = arr_a - arr_b
    return float(np.sqrt(np.sum(d * d)))


def clamp_unit(a) -> np.ndarray:
    """Project every pixel onto [0, 1]. Idempotent."""
    return np.clip(as_image(a), 0.0, 1.0)


# ---------------------------------------------------------------------------
# File formats: 16-bit PGM (P5) for inspection, raw CGF1 for lossless storage.
# ---------------------------------------------------------------------------

def write_pgm(path, a) -> None:
    """16-bit binary PGM; values are clamped to [0, 1] and quantized."""
    arr = as_image(a)
    q = np.round(np.clip(arr, 0.0, 1.0) * PGM_MAXVAL).astype(">u2")
    with open(path, "wb") as fh:
        fh.write(f"P5\n{arr.shape[1]} {arr.shape[0]}\n{PGM_MAXVAL}\n".encode("ascii"))
        fh.write(q.tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    tokens = []
    pos = 0
    # Header is whitespace-separated tokens; '#' starts a comment line.
    while len(tokens) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    pos += 1  # single whitespace byte after maxval
    if tokens[0] != b"P5":
        raise DataError(f"not a binary PGM file: {path}")
    width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval != PGM_MAXVAL:
        raise DataError(f"expected 16-bit PGM (maxval {PGM_MAXVAL}), got {maxval}")
    raw = np.frombuffer(data, dtype=">u2", count=height * width, offset=pos)
    return raw.reshape(height, width).astype(np.float64) / PGM_MAXVAL


def write_raw(path, a) -> None:
    """Lossless container: magic CGF1, u32 height/width LE, float64 pixels."""
    arr = as_image(a)
    with open(path, "wb") as fh:
        fh.write(RAW_MAGIC)
        fh.write(struct.pack("<II", arr.shape[0], arr.shape[1]))
        fh.write(arr.astype("<f8").tobytes(order="C"))


def read_raw(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != RAW_MAGIC:
            raise DataError(f"bad magic {magic!r} in {path}")
        height, width = struct.unpack("<II", fh.read(8))
        raw = np.frombuffer(fh.read(8 * height * width), dtype="<f8")
    if raw.size != height * width:
        raise DataError(f"truncated raw image file {path}")
    return as_image(raw.reshape(height, width))
