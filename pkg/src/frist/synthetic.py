"""Synthetic test images: directional textures, gradients, and a simple
complex-valued phantom. Used by the test suite and the demo scripts."""

from __future__ import annotations

import math

import numpy as np


def oriented_stripes(
    dims: tuple[int, int],
    angle_deg: float = 30.0,
    period: float = 8.0,
    lo: float = 40.0,
    hi: float = 215.0,
    square: bool = True,
) -> np.ndarray:
    """Stripe pattern whose edges run at ``angle_deg`` to the row axis."""
    H, W = dims
    r, c = np.mgrid[0:H, 0:W]
    t = math.cos(math.radians(angle_deg)) * c + math.sin(math.radians(angle_deg)) * r
    wave = np.sin(2.0 * np.pi * t / period)
    if square:
        wave = np.sign(wave)
    return lo + (hi - lo) * 0.5 * (1.0 + wave)


def linear_gradient(dims: tuple[int, int]) -> np.ndarray:
    """Smooth diagonal ramp spanning the full intensity range."""
    H, W = dims
    r, c = np.mgrid[0:H, 0:W]
    return 255.0 * (r + c) / max(H + W - 2, 1)


def blocks_and_stripes(dims: tuple[int, int], angle_deg: float = 30.0) -> np.ndarray:
    """Left half piecewise-constant blocks, right half an oriented stripe
    texture; exercises both flat and directional content."""
    H, W = dims
    img = np.empty((H, W))
    half = W // 2
    img[: H // 2, :half] = 60.0
    img[H // 2 :, :half] = 190.0
    img[: H // 4, : half // 2] = 120.0
    img[3 * H // 4 :, half // 4 : half // 2] = 30.0
    img[:, half:] = oriented_stripes((H, W - half), angle_deg=angle_deg)
    return img


def texture_montage(dims: tuple[int, int], angles=(0.0, 30.0, 60.0, 120.0)) -> np.ndarray:
    """Four-quadrant montage of stripe textures at different orientations."""
    H, W = dims
    img = np.empty((H, W))
    hh, hw = H // 2, W // 2
    quads = [(0, hh, 0, hw), (0, hh, hw, W), (hh, H, 0, hw), (hh, H, hw, W)]
    for (r0, r1, c0, c1), ang in zip(quads, angles):
        img[r0:r1, c0:c1] = oriented_stripes((r1 - r0, c1 - c0), angle_deg=ang)
    return img


def mri_phantom(dims: tuple[int, int]) -> np.ndarray:
    """Piecewise-smooth complex phantom: nested ellipses with a mild
    smooth phase. Magnitudes lie in [0, 255]."""
    H, W = dims
    r, c = np.mgrid[0:H, 0:W]
    y = (r - H / 2) / (H / 2)
    x = (c - W / 2) / (W / 2)
    mag = np.zeros((H, W))
    ellipses = [
        (0.0, 0.0, 0.85, 0.7, 120.0),
        (0.0, 0.1, 0.55, 0.45, 60.0),
        (-0.25, -0.2, 0.2, 0.15, 55.0),
        (0.3, 0.25, 0.15, 0.22, -40.0),
        (0.25, -0.3, 0.12, 0.1, 75.0),
    ]
    for cy, cx, ay, ax, amp in ellipses:
        inside = ((y - cy) / ay) ** 2 + ((x - cx) / ax) ** 2 <= 1.0
        mag[inside] += amp
    mag = np.clip(mag, 0.0, 255.0)
    phase = 0.3 * np.sin(2.0 * np.pi * x / 3.0) * np.cos(2.0 * np.pi * y / 3.0)
    return mag * np.exp(1j * phase)
