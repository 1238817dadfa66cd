"""Binary PGM (P5) reading and writing for 8- and 16-bit single-channel images."""
from __future__ import annotations

from pathlib import Path

import numpy as np


def _tokens(data: bytes, count: int):
    """First ``count`` header tokens and the offset of the raster."""
    out, i, n = [], 0, len(data)
    while len(out) < count:
        while i < n and data[i:i + 1].isspace():
            i += 1
        if i < n and data[i:i + 1] == b"#":
            while i < n and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        j = i
        while j < n and not data[j:j + 1].isspace():
            j += 1
        if j == i:
            raise ValueError("truncated PGM header")
        out.append(data[i:j])
        i = j
    # exactly one whitespace byte separates maxval from the raster
    return out, i + 1


def read_pgm(path) -> np.ndarray:
    """Read a P5 file into a (height, width) uint8 or uint16 array."""
    data = Path(path).read_bytes()
    toks, off = _tokens(data, 4)
    if toks[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM (magic {toks[0]!r})")
    w, h, maxval = (int(t) for t in toks[1:])
    if w <= 0 or h <= 0 or not 0 < maxval < 65536:
        raise ValueError(f"{path}: bad PGM header")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    need = w * h * dtype.itemsize
    raster = data[off:off + need]
    if len(raster) != need:
        raise ValueError(f"{path}: raster truncated")
    arr = np.frombuffer(raster, dtype=dtype).reshape(h, w)
    return arr.astype(np.uint16 if maxval > 255 else np.uint8)


def write_pgm(path, image, maxval: int | None = None) -> None:
    """Write a 2D integer array as P5. uint16 data gets maxval 65535."""
    a = np.asarray(image)
    if a.ndim != 2:
        raise ValueError("PGM needs a 2D array")
    if maxval is None:
        maxval = 65535 if a.dtype.itemsize > 1 else 255
    h, w = a.shape
    header = f"P5\n{w} {h}\n{maxval}\n".encode("ascii")
    dtype = ">u2" if maxval > 255 else "u1"
    Path(path).write_bytes(header + a.astype(dtype).tobytes())


def write_mask(path, mask) -> None:
    write_pgm(path, np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8), 255)
