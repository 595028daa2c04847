"""Patch extraction and re-aggregation, plus the PSNR metric.

Patches are vectorized row-major into the columns of an (n, N) matrix,
n = patch_side**2. Anchors are scanned row-major with a fixed stride;
with ``wrap=True`` patches wrap around the opposite image border, which
at stride 1 yields exactly H*W patches and uniform coverage (every pixel
covered exactly n times).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class PatchSet:
    data: np.ndarray  # (n, N), columns are vectorized patches
    positions: np.ndarray  # (N, 2) anchor (row, col) of each patch
    image_dims: tuple[int, int]
    patch_side: int
    stride: int
    wrap: bool

    @property
    def num_patches(self) -> int:
        return self.data.shape[1]


def _anchor_range(extent: int, patch_side: int, stride: int, wrap: bool) -> np.ndarray:
    if wrap:
        return np.arange(0, extent, stride)
    return np.arange(0, extent - patch_side + 1, stride)


def patch_index_matrix(
    dims: tuple[int, int], patch_side: int, stride: int = 1, wrap: bool = False
) -> tuple[np.ndarray, np.ndarray]:
    """Flat pixel indices of every patch; (n, N) index matrix plus (N, 2) anchors."""
    H, W = dims
    if patch_side > min(H, W):
        raise ValueError(f"patch_side {patch_side} exceeds image dims {dims}")
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    rows = _anchor_range(H, patch_side, stride, wrap)
    cols = _anchor_range(W, patch_side, stride, wrap)
    anchors_r = np.repeat(rows, cols.size)
    anchors_c = np.tile(cols, rows.size)
    dr, dc = np.divmod(np.arange(patch_side * patch_side), patch_side)
    pr = anchors_r[None, :] + dr[:, None]
    pc = anchors_c[None, :] + dc[:, None]
    if wrap:
        pr %= H
        pc %= W
    idx = pr * W + pc
    positions = np.stack([anchors_r, anchors_c], axis=1)
    return idx, positions


def extract(
    image: np.ndarray, patch_side: int, stride: int = 1, wrap: bool = False
) -> PatchSet:
    """Extract overlapping patches as the columns of an (n, N) matrix."""
    image = np.asarray(image)
    if image.ndim != 2:
        raise ValueError(f"expected a 2D image, got shape {image.shape}")
    idx, positions = patch_index_matrix(image.shape, patch_side, stride, wrap)
    data = image.ravel()[idx]
    return PatchSet(data, positions, image.shape, patch_side, stride, wrap)


def accumulate(
    patches: PatchSet, values: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Sum patch values back onto the pixel grid.

    Returns (sum_image, counts). ``values`` overrides the stored patch
    data, e.g. to place restored patches. Accumulation order is fixed, so
    the output is bit-stable.
    """
    if values is None:
        values = patches.data
    idx, _ = patch_index_matrix(
        patches.image_dims, patches.patch_side, patches.stride, patches.wrap
    )
    H, W = patches.image_dims
    acc = np.zeros(H * W, dtype=np.result_type(values.dtype, np.float64))
    counts = np.zeros(H * W, dtype=np.int64)
    np.add.at(acc, idx.ravel(), values.ravel())
    np.add.at(counts, idx.ravel(), 1)
    return acc.reshape(H, W), counts.reshape(H, W)


def aggregate(patches: PatchSet, values: np.ndarray | None = None) -> np.ndarray:
    """Average overlapping patch values per pixel; uncovered pixels are zero."""
    acc, counts = accumulate(patches, values)
    return np.divide(acc, counts, out=np.zeros_like(acc), where=counts > 0)


def coverage(patches: PatchSet) -> np.ndarray:
    """Per-pixel count of covering patches (0 marks uncovered pixels)."""
    return accumulate(patches)[1]


def psnr(reference: np.ndarray, test: np.ndarray, peak: float = 255.0) -> float:
    """10 log10(peak^2 / MSE) in dB; +inf for identical inputs."""
    reference = np.asarray(reference)
    test = np.asarray(test)
    if reference.shape != test.shape:
        raise ValueError(f"shape mismatch: {reference.shape} vs {test.shape}")
    if peak <= 0:
        raise ValueError(f"peak must be positive, got {peak}")
    mse = float(np.mean(np.abs(reference - test) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def clamp_intensity(a: np.ndarray, lo: float = 0.0, hi: float = 255.0) -> np.ndarray:
    """Clip values into the 8-bit intensity range."""
    return np.clip(a, lo, hi)
