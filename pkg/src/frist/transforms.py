"""Transform-model primitives: thresholding projectors, the log-det
regularizer, sparsification error, the learning objective, and the
orthonormal 2D DCT used as a fixed baseline and initializer.

All tie-breaking is deterministic: lowest index for vectors, column-major
order for matrices.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.fft

from .operators import FROperator, apply


class SingularTransformError(Exception):
    """Raised when an operation requires a nonsingular transform."""


def project_sparse(b: np.ndarray, s: int) -> np.ndarray:
    """Keep the s largest-magnitude entries of b, zero the rest.

    Ties are broken toward the lowest index. This is the exact minimizer
    of ||b - x||^2 over ||x||_0 <= s.
    """
    b = np.asarray(b)
    if not 0 <= s <= b.size:
        raise ValueError(f"sparsity {s} out of range [0, {b.size}]")
    out = np.zeros_like(b)
    if s == 0:
        return out
    keep = np.argsort(-np.abs(b), kind="stable")[:s]
    out[keep] = b[keep]
    return out


def project_sparse_columns(B: np.ndarray, s: int) -> np.ndarray:
    """Column-wise project_sparse for an (n, N) matrix."""
    n, N = B.shape
    if not 0 <= s <= n:
        raise ValueError(f"sparsity {s} out of range [0, {n}]")
    if s == 0:
        return np.zeros_like(B)
    if s >= n:
        return B.copy()
    order = np.argsort(-np.abs(B), axis=0, kind="stable")
    mask = np.zeros(B.shape, dtype=bool)
    mask[order[:s, :], np.arange(N)[None, :]] = True
    return np.where(mask, B, 0)


def hard_threshold(b: np.ndarray, tau: float) -> np.ndarray:
    """Zero entries with |b_j| < tau; entries with |b_j| >= tau are kept.

    Exact minimizer of ||b - x||^2 + tau^2 ||x||_0.
    """
    if tau < 0:
        raise ValueError(f"tau must be nonnegative, got {tau}")
    b = np.asarray(b)
    return np.where(np.abs(b) >= tau, b, 0)


def global_threshold(M: np.ndarray, s: int) -> np.ndarray:
    """Keep the s largest-magnitude entries of the whole matrix M.

    Ties are broken by column-major position. Works on complex input
    (magnitude = modulus).
    """
    M = np.asarray(M)
    if not 0 <= s <= M.size:
        raise ValueError(f"budget {s} out of range [0, {M.size}]")
    if s == M.size:
        return M.copy()
    flat = M.ravel(order="F")
    out = np.zeros_like(flat)
    if s > 0:
        keep = np.argsort(-np.abs(flat), kind="stable")[:s]
        out[keep] = flat[keep]
    return out.reshape(M.shape, order="F")


def regularizer(W: np.ndarray) -> float:
    """-log|det W| + ||W||_F^2, the scale/conditioning penalty.

    Raises SingularTransformError when det(W) == 0, where the penalty
    diverges.
    """
    W = np.asarray(W)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValueError(f"W must be square, got shape {W.shape}")
    sign, logdet = np.linalg.slogdet(W)
    if sign == 0 or not np.isfinite(logdet):
        raise SingularTransformError("regularizer diverges: transform is singular")
    return float(-logdet + np.sum(W * W))


def sparsification_error(W: np.ndarray, op: FROperator, y: np.ndarray, s: int) -> float:
    """Energy discarded when W Phi y is projected onto the s-sparse set."""
    b = W @ apply(op, y)
    if s >= b.size:
        return 0.0
    mags = np.sort(np.abs(b))
    return float(np.sum(mags[: b.size - s] ** 2))


def sparsification_error_columns(B: np.ndarray, s) -> np.ndarray:
    """Per-column discarded energy of an (n, N) coefficient matrix.

    ``s`` may be a scalar or a per-column integer array.
    """
    n, N = B.shape
    if np.isscalar(s):
        if s >= n:
            return np.zeros(N)
        if s == 0:
            return np.sum(np.abs(B) ** 2, axis=0)
        low = np.partition(np.abs(B), n - int(s) - 1, axis=0)[: n - int(s)]
        return np.sum(low * low, axis=0)
    s = np.asarray(s)
    out = np.empty(N)
    for val in np.unique(s):
        cols = np.flatnonzero(s == val)
        out[cols] = sparsification_error_columns(B[:, cols], int(val))
    return out


def objective(
    W: np.ndarray,
    X: np.ndarray,
    labels: np.ndarray,
    Y: np.ndarray,
    operators: list[FROperator],
    lam: float,
    sparsity: int | None = None,
) -> float:
    """Clustered sparsification objective sum_i ||W Phi_{labels_i} Y_i - X_i||^2 + lam * Q(W).

    With ``sparsity`` given, acts as the barrier form: returns +inf when
    any code column has more than ``sparsity`` nonzeros.
    """
    if lam <= 0:
        raise ValueError(f"lam must be positive, got {lam}")
    labels = np.asarray(labels)
    if labels.min(initial=0) < 0 or labels.max(initial=-1) >= len(operators):
        raise ValueError("labels reference nonexistent operators")
    if sparsity is not None:
        nnz = np.count_nonzero(X, axis=0)
        if np.any(nnz > sparsity):
            return math.inf
    fidelity = 0.0
    for k, op in enumerate(operators):
        cols = np.flatnonzero(labels == k)
        if cols.size == 0:
            continue
        resid = W @ apply(op, Y[:, cols]) - X[:, cols]
        fidelity += float(np.sum(resid * resid))
    return fidelity + lam * regularizer(W)


def dct_matrix(patch_side: int) -> np.ndarray:
    """Orthonormal 2D DCT on row-major vectorized side x side patches.

    Built as the Kronecker square of the 1D orthonormal DCT-II, so the
    result satisfies W.T @ W = I.
    """
    if patch_side < 1:
        raise ValueError(f"patch_side must be >= 1, got {patch_side}")
    d1 = scipy.fft.dct(np.eye(patch_side), axis=0, norm="ortho")
    return np.kron(d1, d1)
