"""Alternating learning of a flipping/rotation-invariant transform model.

The model is a single square parent transform W shared by a family of
child transforms W @ Phi_k, where each Phi_k is a flip/rotation pixel
permutation. Learning alternates between

  1. sparse coding and clustering: each training patch picks the operator
     whose transformed coefficients it sparsifies best, and its code is the
     s-sparse projection of those coefficients;
  2. a closed-form parent transform update: with G = Yr Yr^T + lam*I = L L^T
     and the full SVD L^{-1} Yr X^T = S Sig V^T, the minimizer of
     ||W Yr - X||_F^2 + lam * (-log|det W| + ||W||_F^2) is
     W = 0.5 V (Sig + (Sig^2 + 2 lam I)^{1/2}) S^T L^{-1}.

Learning starts from all candidate operators and repeatedly drops the half
with the smallest clusters until the requested number K remains; patches of
dropped clusters are immediately re-assigned to their best surviving
operator so the recorded objective never increases.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .operators import FROperator, apply, apply_transpose, child_transform, enumerate_candidates
from .transforms import (
    SingularTransformError,
    dct_matrix,
    project_sparse_columns,
    regularizer,
    sparsification_error_columns,
)

logger = logging.getLogger(__name__)

INIT_CHOICES = ("dct", "klt", "identity", "random")


@dataclass
class LearnConfig:
    patch_side: int = 8
    k_target: int = 2
    num_angles: int | None = None  # default 4 * patch_side
    sparsity: int = 10
    lambda0: float = 3.1e-3
    max_iters: int = 100
    init: str = "dct"
    init_seed: int = 0
    init_std: float = 0.2
    tol_objective: float = 1e-8

    def __post_init__(self):
        if self.init not in INIT_CHOICES:
            raise ValueError(f"init must be one of {INIT_CHOICES}, got {self.init!r}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.lambda0 <= 0:
            raise ValueError("lambda0 must be positive")


@dataclass
class LearnTrace:
    objective: list[float] = field(default_factory=list)
    sparsification_error: list[float] = field(default_factory=list)
    cluster_sizes: list[np.ndarray] = field(default_factory=list)
    condition_number: list[float] = field(default_factory=list)


@dataclass
class SparseCodeSet:
    codes: np.ndarray  # (n, N)
    labels: np.ndarray  # (N,) operator index per patch


@dataclass
class FristModel:
    parent: np.ndarray
    operators: list[FROperator]
    lambda0: float
    sparsity: int
    patch_side: int
    num_angles: int

    @property
    def num_operators(self) -> int:
        return len(self.operators)


def cluster_errors(
    Y: np.ndarray, W: np.ndarray, operators: list[FROperator], s
) -> np.ndarray:
    """(K, N) sparsification error of every patch under every operator.

    ``s`` may be a scalar sparsity or a per-patch integer array.
    """
    if Y.size == 0:
        raise ValueError("empty training matrix")
    errs = np.empty((len(operators), Y.shape[1]))
    for k, op in enumerate(operators):
        B = child_transform(W, op) @ Y
        errs[k] = sparsification_error_columns(B, s)
    return errs


def rotate_columns(Y: np.ndarray, operators: list[FROperator], labels: np.ndarray) -> np.ndarray:
    """Apply each patch's assigned operator: column i becomes Phi_{labels_i} Y_i."""
    out = np.empty_like(Y)
    for k, op in enumerate(operators):
        cols = np.flatnonzero(labels == k)
        if cols.size:
            out[:, cols] = apply(op, Y[:, cols])
    return out


def codes_for_labels(
    Y: np.ndarray, W: np.ndarray, operators: list[FROperator], labels: np.ndarray, s: int
) -> np.ndarray:
    """Sparse codes H_s(W Phi_{labels_i} Y_i) for fixed cluster labels."""
    X = np.empty_like(Y)
    for k, op in enumerate(operators):
        cols = np.flatnonzero(labels == k)
        if cols.size:
            X[:, cols] = project_sparse_columns(child_transform(W, op) @ Y[:, cols], s)
    return X


def sparse_code_and_cluster(
    Y: np.ndarray, W: np.ndarray, operators: list[FROperator], s: int
) -> SparseCodeSet:
    """Jointly pick each patch's best operator and its s-sparse code.

    Label i minimizes the sparsification error over operators (lowest
    index on ties); the code is the s-sparse projection under that choice.
    """
    errs = cluster_errors(Y, W, operators, s)
    labels = np.argmin(errs, axis=0)
    return SparseCodeSet(codes_for_labels(Y, W, operators, labels, s), labels)


def _fix_svd_signs(S: np.ndarray, Vt: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Flip paired signs so each left singular vector has a positive
    # largest-magnitude entry; the reconstructed product is unchanged.
    pick = np.argmax(np.abs(S), axis=0)
    signs = np.sign(S[pick, np.arange(S.shape[1])])
    signs[signs == 0] = 1.0
    return S * signs, Vt * signs[:, None]


def transform_update(Y_rot: np.ndarray, X: np.ndarray, lam: float) -> np.ndarray:
    """Closed-form minimizer of ||W Y_rot - X||_F^2 + lam * Q(W)."""
    if lam <= 0:
        raise ValueError(f"lam must be positive, got {lam}")
    n = Y_rot.shape[0]
    G = Y_rot @ Y_rot.T + lam * np.eye(n)
    try:
        L = np.linalg.cholesky(G)
    except np.linalg.LinAlgError as exc:  # cannot happen for finite data, lam > 0
        raise SingularTransformError(f"gram factorization failed: {exc}") from exc
    M = scipy.linalg.solve_triangular(L, Y_rot @ X.T, lower=True)
    S, sig, Vt = np.linalg.svd(M)
    S, Vt = _fix_svd_signs(S, Vt)
    gains = 0.5 * (sig + np.sqrt(sig * sig + 2.0 * lam))
    # W = V diag(gains) S^T L^{-1}
    St_Linv = scipy.linalg.solve_triangular(L.T, S, lower=False).T
    return (Vt.T * gains) @ St_Linv


def elimination_keep_indices(cluster_sizes, k_target: int) -> list[int]:
    """Indices surviving one halving round: drop the floor(K/2) smallest
    clusters, but never below k_target. Ties drop the higher index first."""
    sizes = list(cluster_sizes)
    m = len(sizes)
    if m <= k_target:
        return list(range(m))
    n_remove = min(m // 2, m - k_target)
    order = sorted(range(m), key=lambda i: (sizes[i], -i))
    removed = set(order[:n_remove])
    return [i for i in range(m) if i not in removed]


def eliminate_clusters(
    operators: list[FROperator], cluster_sizes, k_target: int
) -> list[FROperator]:
    if len(operators) < k_target:
        raise ValueError(f"cannot keep {k_target} of {len(operators)} operators")
    keep = elimination_keep_indices(cluster_sizes, k_target)
    return [operators[i] for i in keep]


def _klt_parent(Y: np.ndarray) -> np.ndarray:
    Yc = Y - Y.mean(axis=1, keepdims=True)
    C = (Yc @ Yc.T) / max(Y.shape[1] - 1, 1)
    evals, evecs = np.linalg.eigh(C)
    E = evecs[:, np.argsort(evals)[::-1]]
    pick = np.argmax(np.abs(E), axis=0)
    signs = np.sign(E[pick, np.arange(E.shape[1])])
    signs[signs == 0] = 1.0
    return (E * signs).T


def initial_parent(config: LearnConfig, Y: np.ndarray) -> np.ndarray:
    n = config.patch_side**2
    if config.init == "dct":
        return dct_matrix(config.patch_side)
    if config.init == "klt":
        return _klt_parent(Y)
    if config.init == "identity":
        return np.eye(n)
    rng = np.random.default_rng(config.init_seed)
    return rng.normal(0.0, config.init_std, size=(n, n))


def learn(
    Y: np.ndarray, config: LearnConfig, operators: list[FROperator] | None = None
) -> tuple[FristModel, LearnTrace]:
    """Learn a transform model from training patches (columns of Y).

    ``operators`` overrides the candidate family; the default is the full
    set of 2 * num_angles flip/rotation permutations. Passing just the
    identity operator with k_target=1 degenerates to single square
    transform learning.
    """
    Y = np.asarray(Y, dtype=np.float64)
    n = config.patch_side**2
    if Y.ndim != 2 or Y.shape[0] != n:
        raise ValueError(f"training matrix must be ({n}, N), got {Y.shape}")
    N = Y.shape[1]
    if N == 0:
        raise ValueError("empty training matrix")
    if N < n:
        logger.warning("only %d training patches for dimension %d; expect a weak model", N, n)

    num_angles = config.num_angles or 4 * config.patch_side
    ops = list(operators) if operators is not None else enumerate_candidates(config.patch_side, num_angles)
    if not 1 <= config.k_target <= len(ops):
        raise ValueError(f"k_target {config.k_target} out of range [1, {len(ops)}]")

    energy = float(np.sum(Y * Y))
    lam = config.lambda0 * (energy if energy > 0 else 1.0)  # all-zero data: keep lam positive
    W = initial_parent(config, Y)
    trace = LearnTrace()
    stall = 0
    prev_obj = math.inf

    for it in range(config.max_iters):
        errs = cluster_errors(Y, W, ops, config.sparsity)
        labels = np.argmin(errs, axis=0)
        if len(ops) > config.k_target:
            sizes = np.bincount(labels, minlength=len(ops))
            keep = elimination_keep_indices(sizes, config.k_target)
            ops = [ops[i] for i in keep]
            labels = np.argmin(errs[keep], axis=0)
        X = codes_for_labels(Y, W, ops, labels, config.sparsity)
        Y_rot = rotate_columns(Y, ops, labels)
        W = transform_update(Y_rot, X, lam)

        resid = W @ Y_rot - X
        fidelity = float(np.sum(resid * resid))
        obj = fidelity + lam * regularizer(W)
        trace.objective.append(obj)
        trace.sparsification_error.append(fidelity)
        trace.cluster_sizes.append(np.bincount(labels, minlength=len(ops)))
        trace.condition_number.append(float(np.linalg.cond(W)))
        logger.debug(
            "iter %d: objective %.6g, fidelity %.6g, K %d, cond %.4g",
            it, obj, fidelity, len(ops), trace.condition_number[-1],
        )

        if len(ops) == config.k_target:
            rel_drop = (prev_obj - obj) / max(abs(prev_obj), 1e-300)
            stall = stall + 1 if rel_drop < config.tol_objective else 0
            if stall >= 3:
                logger.info("early stop at iteration %d (objective stalled)", it + 1)
                break
        prev_obj = obj

    model = FristModel(W, ops, config.lambda0, config.sparsity, config.patch_side, num_angles)
    return model, trace


def reconstruct_patch(model: FristModel, x: np.ndarray, k: int) -> np.ndarray:
    """Least-squares patch estimate Phi_k^T W^{-1} x from a sparse code."""
    try:
        u = np.linalg.solve(model.parent, x)
    except np.linalg.LinAlgError as exc:
        raise SingularTransformError("parent transform is singular") from exc
    return apply_transpose(model.operators[k], u)


def reconstruct_columns(
    parent: np.ndarray, operators: list[FROperator], codes: SparseCodeSet
) -> np.ndarray:
    """Column-wise reconstruction Phi^T W^{-1} x for a whole code set."""
    try:
        U = np.linalg.solve(parent, codes.codes)
    except np.linalg.LinAlgError as exc:
        raise SingularTransformError("parent transform is singular") from exc
    out = np.empty_like(U)
    for k, op in enumerate(operators):
        cols = np.flatnonzero(codes.labels == k)
        if cols.size:
            out[:, cols] = apply_transpose(op, U[:, cols])
    return out
