"""Patch-based inpainting of missing pixels, in two flavors.

Coding uses the penalty form of sparse coding: each patch picks the
operator minimizing ||W Phi y - T_tau(W Phi y)||^2 + tau^2 ||T_tau(.)||_0,
where T_tau is hard thresholding. Per-patch reconstruction is either

  * noiseless: an equality-constrained least squares solve that leaves
    measured pixels untouched and only fills the missing ones, or
  * robust: the penalized solve (W^T W + gamma P) u = W^T x + gamma P z
    in the rotated frame, accelerated through the Woodbury identity on
    whichever of the measured/missing supports is smaller.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .operators import FROperator, apply, apply_transpose, child_transform, enumerate_candidates, identity_operator
from .parallel import run_chunked
from .patches import aggregate, clamp_intensity, extract
from .transforms import dct_matrix, hard_threshold
from .learning import elimination_keep_indices, rotate_columns, transform_update

logger = logging.getLogger(__name__)


@dataclass
class InpaintConfig:
    sigma: float = 0.0  # 0 selects the exact noiseless solver
    patch_side: int = 8
    num_operators: int = 64
    num_angles: int | None = None
    tau_base: float = 1.5
    gamma0: float = 3.0
    lambda0: float = 3.1e-3
    iters: int = 10
    passes: int = 3
    stride: int = 1
    adapt: bool = True
    identity_only: bool = False
    threads: int = 1

    def __post_init__(self):
        if self.sigma < 0 or self.tau_base <= 0:
            raise ValueError("invalid inpainting configuration")


def penalty_cluster(
    W: np.ndarray, operators: list[FROperator], y: np.ndarray, tau: float
) -> tuple[int, np.ndarray]:
    """Best operator and hard-thresholded code for one patch under the
    sparsity-penalty objective; ties go to the lowest operator index."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    best = (np.inf, -1, None)
    for k, op in enumerate(operators):
        b = child_transform(W, op) @ y
        x = hard_threshold(b, tau)
        r = b - x
        obj = float(r @ r) + tau * tau * np.count_nonzero(x)
        if obj < best[0]:
            best = (obj, k, x)
    return best[1], best[2]


def _penalty_cluster_all(
    W: np.ndarray, operators: list[FROperator], Y: np.ndarray, tau: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized penalty clustering; returns (labels, codes, objectives)."""
    K, N = len(operators), Y.shape[1]
    objs = np.empty((K, N))
    for k, op in enumerate(operators):
        B = child_transform(W, op) @ Y
        Xk = hard_threshold(B, tau)
        R = B - Xk
        objs[k] = np.sum(R * R, axis=0) + tau * tau * np.count_nonzero(Xk, axis=0)
    labels = np.argmin(objs, axis=0)
    codes = np.empty_like(Y)
    for k, op in enumerate(operators):
        cols = np.flatnonzero(labels == k)
        if cols.size:
            codes[:, cols] = hard_threshold(child_transform(W, op) @ Y[:, cols], tau)
    return labels, codes, objs


def inpaint_patch_noiseless(
    W: np.ndarray,
    op: FROperator,
    z_i: np.ndarray,
    mask_i: np.ndarray,
    x_i: np.ndarray,
) -> np.ndarray:
    """Fill the missing pixels of one patch, keeping measured ones exact.

    Solves min ||W Phi y - x||^2 subject to y agreeing with z_i on the
    measured support, by least squares over the missing coefficients.
    """
    mask_rot = apply(op, np.asarray(mask_i, dtype=bool))
    omega = np.flatnonzero(~mask_rot)
    if omega.size == 0:
        return np.asarray(z_i, dtype=np.float64).copy()
    rhs = x_i - W @ apply(op, z_i)
    sol, _, rank, _ = np.linalg.lstsq(W[:, omega], rhs, rcond=None)
    if rank < omega.size:
        logger.debug("ill-posed patch: fill support %d, rank %d", omega.size, rank)
    xi = np.zeros(W.shape[0], dtype=np.float64)
    xi[omega] = sol
    return z_i + apply_transpose(op, xi)


class _RobustSolver:
    """Per-transform precomputation for the penalized patch solve."""

    def __init__(self, W: np.ndarray, gamma: float):
        if gamma <= 0:
            raise ValueError("gamma must be positive")
        n = W.shape[0]
        self.W = W
        self.gamma = gamma
        self.B = np.linalg.inv(W.T @ W)  # small-support identity
        self.Bg = np.linalg.inv(W.T @ W + gamma * np.eye(n))  # complement identity

    def _apply_inverse(self, rhs, measured, missing):
        gamma = self.gamma
        q = measured.size
        if q == 0:
            return self.B @ rhs
        if q <= rhs.size // 2:
            B = self.B
            core = B[np.ix_(measured, measured)] + np.eye(q) / gamma
            return B @ rhs - B[:, measured] @ np.linalg.solve(core, B[measured, :] @ rhs)
        Bg = self.Bg
        if missing.size == 0:
            return Bg @ rhs
        core = Bg[np.ix_(missing, missing)] - np.eye(missing.size) / gamma
        return Bg @ rhs - Bg[:, missing] @ np.linalg.solve(core, Bg[missing, :] @ rhs)

    def solve_rotated(self, z_rot, mask_rot, x):
        gamma = self.gamma
        rhs = self.W.T @ x + gamma * np.where(mask_rot, z_rot, 0.0)
        measured = np.flatnonzero(mask_rot)
        missing = np.flatnonzero(~mask_rot)
        u = self._apply_inverse(rhs, measured, missing)
        # one step of iterative refinement recovers digits lost in the
        # explicit Gram inverses when W is poorly conditioned
        resid = rhs - (self.W.T @ (self.W @ u) + gamma * np.where(mask_rot, u, 0.0))
        return u + self._apply_inverse(resid, measured, missing)


def inpaint_patch_robust(
    W: np.ndarray,
    op: FROperator,
    z_i: np.ndarray,
    mask_i: np.ndarray,
    x_i: np.ndarray,
    gamma: float,
    solver: _RobustSolver | None = None,
) -> np.ndarray:
    """Penalized reconstruction of one noisy, partially observed patch."""
    if solver is None:
        solver = _RobustSolver(W, gamma)
    mask_rot = apply(op, np.asarray(mask_i, dtype=bool))
    u = solver.solve_rotated(apply(op, z_i), mask_rot, x_i)
    return apply_transpose(op, u)


def interpolate_missing(z: np.ndarray, mask: np.ndarray, neighbors: int = 16) -> np.ndarray:
    """Inverse-distance fill of missing pixels from the nearest measured ones."""
    z = np.asarray(z, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    out = z.copy()
    if mask.all():
        return out
    if not mask.any():
        return np.zeros_like(out)
    avail = np.argwhere(mask)
    miss = np.argwhere(~mask)
    k = min(neighbors, len(avail))
    dist, idx = cKDTree(avail).query(miss, k=k)
    dist = np.atleast_2d(dist.T).T
    idx = np.atleast_2d(idx.T).T
    weights = 1.0 / (dist * dist)
    vals = z[mask][idx]
    out[~mask] = np.sum(weights * vals, axis=1) / np.sum(weights, axis=1)
    return out


def _initial_operators(config: InpaintConfig) -> list[FROperator]:
    if config.identity_only:
        return [identity_operator(config.patch_side, config.num_angles)]
    return enumerate_candidates(config.patch_side, config.num_angles)


def inpaint(z: np.ndarray, mask: np.ndarray, config: InpaintConfig) -> np.ndarray:
    """Reconstruct an image from partial (optionally noisy) pixels.

    ``z`` holds measured intensities with zeros at missing positions;
    ``mask`` is True where a pixel was measured.
    """
    z = np.asarray(z, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if z.shape != mask.shape:
        raise ValueError("image and mask dims differ")
    side = config.patch_side
    missing_fraction = 1.0 - mask.mean()
    tau = config.tau_base * max(missing_fraction, 1e-3)

    if mask.all() and config.sigma == 0:
        return z.copy()

    img = interpolate_missing(z, mask)
    W = dct_matrix(side)
    ops = _initial_operators(config)
    zset = extract(z, side, config.stride, wrap=False)
    mset = extract(mask.astype(np.float64), side, config.stride, wrap=False)
    patch_masks = mset.data > 0.5

    for _ in range(config.passes):
        pset = extract(img, side, config.stride, wrap=False)
        Y = pset.data
        labels = codes = None
        for it in range(config.iters + 1):
            labels, codes, _ = _penalty_cluster_all(W, ops, Y, tau)
            if len(ops) > config.num_operators:
                sizes = np.bincount(labels, minlength=len(ops))
                keep = elimination_keep_indices(sizes, config.num_operators)
                ops = [ops[i] for i in keep]
                labels, codes, _ = _penalty_cluster_all(W, ops, Y, tau)
            if it < config.iters and config.adapt:
                Y_rot = rotate_columns(Y, ops, labels)
                W = transform_update(Y_rot, codes, config.lambda0 * max(float(np.sum(Y * Y)), 1e-12))

        Y_rec = np.empty_like(Y)
        if config.sigma == 0:
            def worker(start, stop):
                for i in range(start, stop):
                    Y_rec[:, i] = inpaint_patch_noiseless(
                        W, ops[labels[i]], zset.data[:, i], patch_masks[:, i], codes[:, i]
                    )
        else:
            solver = _RobustSolver(W, config.gamma0 / config.sigma)
            def worker(start, stop):
                for i in range(start, stop):
                    Y_rec[:, i] = inpaint_patch_robust(
                        W, ops[labels[i]], zset.data[:, i], patch_masks[:, i],
                        codes[:, i], solver.gamma, solver,
                    )
        run_chunked(worker, Y.shape[1], config.threads)

        img = aggregate(pset, clamp_intensity(Y_rec))
        if config.sigma == 0:
            img[mask] = z[mask]  # exact data consistency in the noiseless model
    return img
