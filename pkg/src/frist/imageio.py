"""Minimal image file I/O: binary 8-bit PGM, single-channel PFM floats,
and the .cpx container for complex-valued images.

.cpx layout: magic "CPX1", little-endian u32 height, u32 width, then
height*width interleaved (re, im) float64 pairs, row-major.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

_CPX_MAGIC = b"CPX1"


def read_pgm(path) -> np.ndarray:
    """Read a binary (P5) 8-bit PGM into a float64 array."""
    raw = Path(path).read_bytes()
    if not raw.startswith(b"P5"):
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    # header: magic, width, height, maxval; '#' starts a comment line
    fields: list[int] = []
    pos = 2
    while len(fields) < 3:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        fields.append(int(raw[start:pos]))
    pos += 1  # single whitespace after maxval
    width, height, maxval = fields
    if maxval != 255:
        raise ValueError(f"{path}: only 8-bit PGM supported (maxval {maxval})")
    data = np.frombuffer(raw, dtype=np.uint8, count=width * height, offset=pos)
    return data.reshape(height, width).astype(np.float64)


def write_pgm(path, image: np.ndarray) -> None:
    """Write a 2D array as binary 8-bit PGM (values rounded and clipped)."""
    image = np.asarray(image)
    if image.ndim != 2:
        raise ValueError(f"expected a 2D image, got shape {image.shape}")
    px = np.clip(np.rint(image), 0, 255).astype(np.uint8)
    h, w = px.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(px.tobytes())


def read_pfm(path) -> np.ndarray:
    """Read a single-channel PFM (little-endian f32, bottom-up rows)."""
    with open(path, "rb") as f:
        tag = f.readline().strip()
        if tag != b"Pf":
            raise ValueError(f"{path}: not a single-channel PFM file")
        w, h = (int(v) for v in f.readline().split())
        scale = float(f.readline())
        if scale >= 0:
            raise ValueError(f"{path}: big-endian PFM not supported")
        data = np.frombuffer(f.read(w * h * 4), dtype="<f4")
    return np.flipud(data.reshape(h, w)).astype(np.float64)


def write_pfm(path, image: np.ndarray) -> None:
    image = np.asarray(image)
    if image.ndim != 2:
        raise ValueError(f"expected a 2D image, got shape {image.shape}")
    h, w = image.shape
    with open(path, "wb") as f:
        f.write(f"Pf\n{w} {h}\n-1.0\n".encode("ascii"))
        f.write(np.flipud(image).astype("<f4").tobytes())


def read_cpx(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:4] != _CPX_MAGIC:
        raise ValueError(f"{path}: not a CPX1 file")
    h, w = struct.unpack_from("<II", raw, 4)
    data = np.frombuffer(raw, dtype="<f8", count=2 * h * w, offset=12)
    return (data[0::2] + 1j * data[1::2]).reshape(h, w)


def write_cpx(path, image: np.ndarray) -> None:
    image = np.asarray(image, dtype=np.complex128)
    if image.ndim != 2:
        raise ValueError(f"expected a 2D image, got shape {image.shape}")
    h, w = image.shape
    inter = np.empty(2 * h * w, dtype="<f8")
    inter[0::2] = image.real.ravel()
    inter[1::2] = image.imag.ravel()
    with open(path, "wb") as f:
        f.write(_CPX_MAGIC)
        f.write(struct.pack("<II", h, w))
        f.write(inter.tobytes())
