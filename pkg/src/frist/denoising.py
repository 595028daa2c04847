"""Patch-based denoising with an adaptively learned transform model.

Each pass alternates three steps over the patches of the current image
estimate: (i) operator clustering by sparsification error at each patch's
current sparsity level, (ii) a per-patch sparsity search that grows s
until the restored patch matches the noisy data within n*C^2*sigma^2,
and (iii) the closed-form transform update. Restored patches are clamped
to [0, 255] and averaged at their image locations; later passes rerun the
whole procedure on the previous output with a decayed noise level.

The per-patch restore solves the stacked least squares system
min_u ||W u - H_s(W v)||^2 + tau ||u - v||^2 in the rotated frame, whose
solution is u = (tau I + W^T W)^{-1} (tau v + W^T H_s(W v)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .operators import FROperator, apply_transpose, enumerate_candidates, identity_operator
from .patches import aggregate, clamp_intensity, extract
from .transforms import dct_matrix, project_sparse
from .learning import cluster_errors, elimination_keep_indices, rotate_columns, transform_update


@dataclass
class DenoiseConfig:
    sigma: float
    patch_side: int = 8
    num_operators: int = 64
    num_angles: int | None = None
    error_const: float = 1.04  # C in the stopping condition
    tau0: float = 0.01
    lambda0: float = 3.1e-3
    iters_per_pass: int = 12
    passes: int = 2
    sigma_decay: float = 0.7
    init_sparsity: int = 10
    stride: int = 1
    adapt: bool = True  # False freezes the initial (DCT) transform
    identity_only: bool = False

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.error_const <= 0 or self.passes < 1 or self.iters_per_pass < 1:
            raise ValueError("invalid denoising configuration")


@dataclass
class _ModelState:
    parent: np.ndarray
    operators: list[FROperator]


class _RestoreSolver:
    """Factors (tau I + W^T W) once per transform and exposes the pieces
    needed for incremental sparsity scans."""

    def __init__(self, W: np.ndarray, tau: float):
        n = W.shape[0]
        self.W = W
        self.tau = tau
        self.M = np.linalg.inv(tau * np.eye(n) + W.T @ W)
        self.MWt = self.M @ W.T

    def restore_rotated(self, v: np.ndarray, s: int) -> np.ndarray:
        x = project_sparse(self.W @ v, s)
        return self.M @ (self.tau * v + self.W.T @ x)


def patch_restore(
    W: np.ndarray,
    op: FROperator,
    v: np.ndarray,
    s: int,
    tau: float,
    solver: _RestoreSolver | None = None,
) -> np.ndarray:
    """Restore one patch from its rotated noisy version v = Phi (noisy patch)."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    if solver is None:
        solver = _RestoreSolver(W, tau)
    return apply_transpose(op, solver.restore_rotated(v, s))


def _search_rotated(
    solver: _RestoreSolver, v: np.ndarray, threshold: float
) -> tuple[int, np.ndarray, np.ndarray]:
    """Smallest s whose restore fits v within ``threshold``; returns
    (s, rotated restored patch, sparse code)."""
    b = solver.W @ v
    order = np.argsort(-np.abs(b), kind="stable")
    u = solver.tau * (solver.M @ v)
    s = 0
    while True:
        r = v - u
        if float(r @ r) <= threshold or s >= b.size:
            break
        u = u + b[order[s]] * solver.MWt[:, order[s]]
        s += 1
    x = np.zeros_like(b)
    x[order[:s]] = b[order[:s]]
    return s, u, x


def sparsity_search(
    W: np.ndarray,
    op: FROperator,
    v: np.ndarray,
    tau: float,
    sigma: float,
    error_const: float,
    solver: _RestoreSolver | None = None,
) -> tuple[int, np.ndarray]:
    """Pick the smallest sparsity whose restored patch meets the error
    condition ||v - Phi y||^2 <= n C^2 sigma^2; returns (s, restored patch)."""
    if sigma <= 0 or error_const <= 0:
        raise ValueError("sigma and error_const must be positive")
    if solver is None:
        solver = _RestoreSolver(W, tau)
    threshold = v.size * (error_const * sigma) ** 2
    s, u, _ = _search_rotated(solver, v, threshold)
    return s, apply_transpose(op, u)


def _code_and_restore_all(
    solver: _RestoreSolver, V: np.ndarray, threshold: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batched sparsity search over all patch columns at once.

    Same incremental scan as _search_rotated, advanced one sparsity level
    per step for every still-unsatisfied column. Runs as whole-matrix
    numpy ops (never partitioned), so results do not depend on any worker
    thread count.
    """
    n, N = V.shape
    B = solver.W @ V
    order = np.argsort(-np.abs(B), axis=0, kind="stable")
    U = solver.tau * (solver.M @ V)
    s_out = np.zeros(N, dtype=np.int64)
    X = np.zeros_like(V)

    resid = V - U
    active = np.flatnonzero(np.einsum("ij,ij->j", resid, resid) > threshold)
    s = 0
    while active.size and s < n:
        j = order[s, active]
        coeff = B[j, active]
        U[:, active] += coeff * solver.MWt[:, j]
        X[j, active] = coeff
        s += 1
        s_out[active] = s
        resid = V[:, active] - U[:, active]
        active = active[np.einsum("ij,ij->j", resid, resid) > threshold]
    return s_out, U, X


def denoise_pass(
    z: np.ndarray,
    config: DenoiseConfig,
    sigma_pass: float,
    state: _ModelState | None = None,
) -> np.ndarray:
    """One full denoising pass over image z at noise level sigma_pass."""
    side = config.patch_side
    n = side * side
    pset = extract(z, side, config.stride, wrap=False)
    Z = pset.data
    N = Z.shape[1]

    if state is None:
        state = _ModelState(dct_matrix(side), _initial_operators(config))
    W, ops = state.parent, state.operators

    tau = config.tau0 / sigma_pass
    threshold = n * (config.error_const * sigma_pass) ** 2
    Y_est = Z.copy()
    s_cur = np.full(N, min(config.init_sparsity, n), dtype=np.int64)

    # iters_per_pass full alternations, then one final coding step so the
    # output patches are consistent with the last transform update.
    for it in range(config.iters_per_pass + 1):
        errs = cluster_errors(Y_est, W, ops, s_cur)
        labels = np.argmin(errs, axis=0)
        if len(ops) > config.num_operators:
            sizes = np.bincount(labels, minlength=len(ops))
            keep = elimination_keep_indices(sizes, config.num_operators)
            ops = [ops[i] for i in keep]
            labels = np.argmin(errs[keep], axis=0)

        solver = _RestoreSolver(W, tau)
        V = rotate_columns(Z, ops, labels)
        s_cur, U, X = _code_and_restore_all(solver, V, threshold)
        Y_est = _unrotate_columns(U, ops, labels)

        if it < config.iters_per_pass and config.adapt:
            lam = config.lambda0 * max(float(np.sum(U * U)), 1e-12)
            W = transform_update(U, X, lam)

    state.parent, state.operators = W, ops
    return aggregate(pset, clamp_intensity(Y_est))


def _unrotate_columns(U: np.ndarray, ops: list[FROperator], labels: np.ndarray) -> np.ndarray:
    out = np.empty_like(U)
    for k, op in enumerate(ops):
        cols = np.flatnonzero(labels == k)
        if cols.size:
            out[:, cols] = apply_transpose(op, U[:, cols])
    return out


def _initial_operators(config: DenoiseConfig) -> list[FROperator]:
    if config.identity_only:
        return [identity_operator(config.patch_side, config.num_angles)]
    return enumerate_candidates(config.patch_side, config.num_angles)


def denoise(z: np.ndarray, config: DenoiseConfig) -> np.ndarray:
    """Multi-pass denoising: each pass reruns the algorithm on the latest
    estimate with noise level sigma * sigma_decay^(pass-1)."""
    img = np.asarray(z, dtype=np.float64)
    state = _ModelState(dct_matrix(config.patch_side), _initial_operators(config))
    for p in range(config.passes):
        img = denoise_pass(img, config, config.sigma * config.sigma_decay**p, state)
    return img
