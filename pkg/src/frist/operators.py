"""Flipping and rotation (FR) permutation operators on square patches.

Every operator here is a pixel permutation of a vectorized ``side x side``
patch (row-major). Rotations by multiples of 90 degrees are exact grid
rotations; other angles are approximated by a deterministic greedy
assignment of pixels to their rotated positions, so no interpolation is
ever performed and every operator stays an exact permutation matrix.

A permutation is stored as an index array ``mapping`` with the convention
``out[mapping[j]] = in[j]``, i.e. ``mapping[j]`` is the row of the single 1
in column ``j`` of the corresponding permutation matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Distances closer than this are treated as ties and broken by row-major
# index, so operator construction is platform independent.
_TIE_TOL = 1e-12


def is_bijection(mapping: np.ndarray) -> bool:
    """True when ``mapping`` is a permutation of 0..n-1."""
    m = np.asarray(mapping)
    return m.ndim == 1 and np.array_equal(np.sort(m), np.arange(m.size))


def compose_mappings(outer: np.ndarray, inner: np.ndarray) -> np.ndarray:
    """Mapping of ``outer @ inner`` (apply ``inner`` first)."""
    return outer[inner]


def invert_mapping(mapping: np.ndarray) -> np.ndarray:
    inv = np.empty_like(mapping)
    inv[mapping] = np.arange(mapping.size)
    return inv


def flip_mapping(patch_side: int) -> np.ndarray:
    """Left-to-right flip of a row-major vectorized square patch."""
    if patch_side < 1:
        raise ValueError(f"patch_side must be >= 1, got {patch_side}")
    r, c = np.divmod(np.arange(patch_side * patch_side), patch_side)
    return r * patch_side + (patch_side - 1 - c)


def _exact_quarter_turn(quarter_turns: int, side: int) -> np.ndarray:
    """Exact counter-clockwise rotation by ``quarter_turns`` * 90 degrees."""
    r, c = np.divmod(np.arange(side * side), side)
    for _ in range(quarter_turns % 4):
        r, c = side - 1 - c, r
    return r * side + c


def _greedy_rotation(theta: float, side: int) -> np.ndarray:
    """Permutation approximating rotation by ``theta`` radians (CCW).

    Pixel centers are rotated about the patch centroid, then source pixels
    are assigned to grid cells greedily: repeatedly pick the unassigned
    pixel whose rotated position is closest to some free cell and give it
    that cell. Ties (within _TIE_TOL) go to the lowest row-major index,
    first among pixels, then among cells.
    """
    n = side * side
    r, c = np.divmod(np.arange(n), side)
    center = (side - 1) / 2.0
    # x right, y up; grid rows grow downward
    x = c - center
    y = center - r
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    xr = cos_t * x - sin_t * y
    yr = sin_t * x + cos_t * y
    rot_row = center - yr
    rot_col = xr + center

    # dist2[j, cell] = squared distance from rotated pixel j to grid cell
    dist2 = (rot_row[:, None] - r[None, :]) ** 2 + (rot_col[:, None] - c[None, :]) ** 2

    mapping = np.full(n, -1, dtype=np.int64)
    free = np.ones(n, dtype=bool)
    unassigned = np.ones(n, dtype=bool)
    for _ in range(n):
        sub = dist2[np.ix_(unassigned, free)]
        nearest = sub.min(axis=1)
        best = nearest.min()
        src_candidates = np.flatnonzero(unassigned)[nearest <= best + _TIE_TOL]
        j = src_candidates[0]
        cell_d = dist2[j, free]
        cell_candidates = np.flatnonzero(free)[cell_d <= cell_d.min() + _TIE_TOL]
        cell = cell_candidates[0]
        mapping[j] = cell
        free[cell] = False
        unassigned[j] = False
    return mapping


def rotation_mapping(angle_index: int, num_angles: int, patch_side: int) -> np.ndarray:
    """Pixel permutation approximating rotation by angle_index*360/num_angles degrees."""
    if num_angles < 4 or num_angles % 4 != 0:
        raise ValueError(f"num_angles must be a positive multiple of 4, got {num_angles}")
    if not 0 <= angle_index < num_angles:
        raise ValueError(f"angle_index {angle_index} out of range [0, {num_angles})")
    if patch_side < 1:
        raise ValueError(f"patch_side must be >= 1, got {patch_side}")
    quarter = num_angles // 4
    if angle_index % quarter == 0:
        return _exact_quarter_turn(angle_index // quarter, patch_side)
    theta = 2.0 * np.pi * angle_index / num_angles
    return _greedy_rotation(theta, patch_side)


@dataclass(frozen=True, eq=False)
class FROperator:
    """One flip-then-rotate pixel permutation Phi = G(angle) F(flip)."""

    angle_index: int
    flip: bool
    num_angles: int
    patch_side: int
    mapping: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.patch_side * self.patch_side

    @property
    def is_identity(self) -> bool:
        return self.angle_index == 0 and not self.flip


def build_operator(angle_index: int, flip: bool, num_angles: int, patch_side: int) -> FROperator:
    """Construct the FR operator for one (angle, flip) choice."""
    rot = rotation_mapping(angle_index, num_angles, patch_side)
    mapping = compose_mappings(rot, flip_mapping(patch_side)) if flip else rot
    return FROperator(angle_index, flip, num_angles, patch_side, mapping)


def identity_operator(patch_side: int, num_angles: int | None = None) -> FROperator:
    if num_angles is None:
        num_angles = default_num_angles(patch_side)
    return build_operator(0, False, num_angles, patch_side)


def default_num_angles(patch_side: int) -> int:
    """Default angle count: grows linearly with the patch side (4 per side pixel)."""
    return 4 * patch_side


def enumerate_candidates(patch_side: int, num_angles: int | None = None) -> list[FROperator]:
    """All 2*num_angles FR operators, ordered by (angle_index, flip).

    The first candidate is always the identity, so any model drawn from
    this family can fall back to plain single-transform behavior.
    """
    if num_angles is None:
        num_angles = default_num_angles(patch_side)
    if num_angles < 4 or num_angles % 4 != 0:
        raise ValueError(f"num_angles must be a positive multiple of 4, got {num_angles}")
    return [
        build_operator(q, flip, num_angles, patch_side)
        for q in range(num_angles)
        for flip in (False, True)
    ]


def apply(op: FROperator, patch: np.ndarray) -> np.ndarray:
    """Apply the permutation: out[mapping[j]] = patch[j].

    Works on a vector of length n or a matrix whose rows are permuted
    (columns are independent patches).
    """
    patch = np.asarray(patch)
    if patch.shape[0] != op.size:
        raise ValueError(f"patch has leading dimension {patch.shape[0]}, expected {op.size}")
    out = np.empty_like(patch)
    out[op.mapping] = patch
    return out


def apply_transpose(op: FROperator, patch: np.ndarray) -> np.ndarray:
    """Apply the inverse (= transpose) permutation."""
    patch = np.asarray(patch)
    if patch.shape[0] != op.size:
        raise ValueError(f"patch has leading dimension {patch.shape[0]}, expected {op.size}")
    return patch[op.mapping]


def child_transform(parent: np.ndarray, op: FROperator) -> np.ndarray:
    """The child transform W @ Phi, computed as a column permutation of W."""
    return parent[:, op.mapping]
