"""Binary model file format.

Layout (all little-endian): magic "FRST1", u32 n, u32 K, u32 num_angles,
u32 patch_side, f64 lambda0, u32 sparsity, then K operator records of
(u32 angle_index, u8 flip), then n*n f64 row-major parent matrix. The
permutations themselves are not stored; they are rebuilt deterministically
from (angle_index, flip) on load.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .learning import FristModel
from .operators import build_operator

MAGIC = b"FRST1"
_HEADER = struct.Struct("<IIIIdI")
_OP_RECORD = struct.Struct("<IB")


def save_model(path, model: FristModel) -> None:
    n = model.patch_side**2
    if model.parent.shape != (n, n):
        raise ValueError(f"parent shape {model.parent.shape} does not match patch side")
    parts = [MAGIC]
    parts.append(_HEADER.pack(
        n, len(model.operators), model.num_angles, model.patch_side,
        model.lambda0, model.sparsity,
    ))
    for op in model.operators:
        parts.append(_OP_RECORD.pack(op.angle_index, 1 if op.flip else 0))
    parts.append(np.ascontiguousarray(model.parent, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_model(path) -> FristModel:
    raw = Path(path).read_bytes()
    if raw[: len(MAGIC)] != MAGIC:
        raise ValueError(f"{path}: not a FRST1 model file")
    pos = len(MAGIC)
    n, K, num_angles, patch_side, lambda0, sparsity = _HEADER.unpack_from(raw, pos)
    pos += _HEADER.size
    if n != patch_side * patch_side:
        raise ValueError(f"{path}: inconsistent header (n={n}, patch_side={patch_side})")
    operators = []
    for _ in range(K):
        angle_index, flip = _OP_RECORD.unpack_from(raw, pos)
        pos += _OP_RECORD.size
        operators.append(build_operator(angle_index, bool(flip), num_angles, patch_side))
    expected = pos + 8 * n * n
    if len(raw) < expected:
        raise ValueError(f"{path}: truncated model file")
    parent = np.frombuffer(raw, dtype="<f8", count=n * n, offset=pos).reshape(n, n).copy()
    return FristModel(parent, operators, lambda0, sparsity, patch_side, num_angles)
