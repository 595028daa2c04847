"""Blind compressed-sensing MRI reconstruction with a unitary parent
transform and flip/rotation operator clustering.

The image is recovered from undersampled k-space by alternating
  (i)   approximate clustering: for each operator k, the stacked patch
        coefficients are globally thresholded to the sparsity budget and
        each patch joins the operator leaving it the smallest residual;
  (ii)  a unitary Procrustes update of the parent transform; and
  (iii) an exact image update. With stride-1 wrap-around patches the
        patch normal matrix is n*I, so in Fourier space the update is a
        per-frequency division by (n + mu*sampled + rho); the Lagrange
        multiplier rho enforcing ||y||_2 <= L is found by a safeguarded
        Newton iteration on the monotone scalar equation ||y(rho)||^2 = L^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .learning import SparseCodeSet, elimination_keep_indices, rotate_columns
from .operators import FROperator, apply_transpose, child_transform, enumerate_candidates
from .patches import patch_index_matrix
from .transforms import dct_matrix, global_threshold


class ConvergenceError(RuntimeError):
    """Scalar root solve for the energy constraint failed to converge."""


@dataclass
class KSpaceData:
    measurements: np.ndarray  # (M,) complex samples
    sample_set: np.ndarray  # (M,) unique flat indices into the H x W grid
    dims: tuple[int, int]

    def __post_init__(self):
        self.measurements = np.asarray(self.measurements, dtype=np.complex128)
        self.sample_set = np.asarray(self.sample_set, dtype=np.int64)
        H, W = self.dims
        if self.measurements.shape != self.sample_set.shape:
            raise ValueError("measurements and sample_set length mismatch")
        if np.unique(self.sample_set).size != self.sample_set.size:
            raise ValueError("sample_set indices must be unique")
        if self.sample_set.size and not (
            0 <= self.sample_set.min() and self.sample_set.max() < H * W
        ):
            raise ValueError("sample_set index out of range")


@dataclass
class MriConfig:
    patch_side: int = 6
    num_operators: int = 32
    num_angles: int | None = None
    s_fraction: float = 0.05  # sparsity budget as a fraction of n * num_patches
    mu: float | None = None  # data weight; default 1e-2 * peak(|zero-filled|)^2
    energy_bound: float | None = None  # L; default 1.05*||zero-filled||*sqrt(P/M)
    iters: int = 30
    sparsity_rampup_iters: int | None = None  # default ceil(iters / 3)

    def __post_init__(self):
        if not 0 < self.s_fraction < 1:
            raise ValueError("s_fraction must be in (0, 1)")
        if self.iters < 1:
            raise ValueError("iters must be >= 1")


@dataclass
class MriTrace:
    objective: list[float] = field(default_factory=list)
    fidelity: list[float] = field(default_factory=list)
    sparsity: list[int] = field(default_factory=list)
    unitarity_error: list[float] = field(default_factory=list)


def dft2(image: np.ndarray) -> np.ndarray:
    """Unitary 2D DFT (Parseval: energy preserving)."""
    return np.fft.fft2(image, norm="ortho")


def idft2(spectrum: np.ndarray) -> np.ndarray:
    return np.fft.ifft2(spectrum, norm="ortho")


def zero_filled(kspace: KSpaceData) -> np.ndarray:
    """Inverse DFT with unsampled frequencies set to zero."""
    H, W = kspace.dims
    ks = np.zeros(H * W, dtype=np.complex128)
    ks[kspace.sample_set] = kspace.measurements
    return idft2(ks.reshape(H, W))


def measure(image: np.ndarray, sample_set: np.ndarray) -> KSpaceData:
    """Sample the unitary DFT of an image at the given flat frequency indices."""
    spectrum = dft2(np.asarray(image, dtype=np.complex128))
    sample_set = np.asarray(sample_set, dtype=np.int64)
    return KSpaceData(spectrum.ravel()[sample_set], sample_set, image.shape)


def _stacked_cluster_errors(
    W: np.ndarray, operators: list[FROperator], patch_matrix: np.ndarray, s: int
) -> np.ndarray:
    """(K, N) per-patch residual energy after globally thresholding each
    operator's full coefficient matrix to the shared budget s."""
    errs = np.empty((len(operators), patch_matrix.shape[1]))
    for k, op in enumerate(operators):
        B = child_transform(W, op) @ patch_matrix
        R = B - global_threshold(B, s)
        errs[k] = np.sum(np.abs(R) ** 2, axis=0)
    return errs


def approximate_cluster(
    W: np.ndarray, operators: list[FROperator], patch_matrix: np.ndarray, s: int
) -> np.ndarray:
    """Assign each patch to the operator with the smallest share of the
    global thresholding residual (lowest index on ties)."""
    return np.argmin(_stacked_cluster_errors(W, operators, patch_matrix, s), axis=0)


def mri_sparse_code(
    W: np.ndarray,
    operators: list[FROperator],
    labels: np.ndarray,
    patch_matrix: np.ndarray,
    s: int,
) -> SparseCodeSet:
    """Codes under a matrix-wide sparsity budget: threshold the stacked
    clustered coefficients, retaining the s largest magnitudes overall."""
    A = rotate_columns(patch_matrix, operators, labels)
    return SparseCodeSet(global_threshold(W @ A, s), labels)


def unitary_update(A: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Unitary W minimizing ||W A - X||_F: W = V S^H for svd(A X^H) = S Sig V^H."""
    S, _, Vh = np.linalg.svd(A @ X.conj().T)
    return Vh.conj().T @ S.conj().T


def _solve_energy_multiplier(weights: np.ndarray, diag: np.ndarray, bound_sq: float) -> float:
    """Root of g(rho) = sum_i w_i / (d_i + rho)^2 - bound_sq for rho >= 0.

    g is strictly decreasing and convex, so Newton from the left converges
    monotonically; a bisection bracket guards every step.
    """
    def g(rho: float) -> float:
        return float(np.sum(weights / (diag + rho) ** 2)) - bound_sq

    if g(0.0) <= 0.0:
        return 0.0
    lo, hi = 0.0, 1.0
    while g(hi) > 0.0:
        lo, hi = hi, hi * 2.0
        if hi > 1e300:
            raise ConvergenceError("energy constraint cannot be bracketed")
    rho, val = lo, g(lo)
    tol = 1e-12 * max(bound_sq, 1.0)
    for _ in range(100):
        if abs(val) <= tol:
            return rho
        slope = float(-2.0 * np.sum(weights / (diag + rho) ** 3))
        step = -val / slope
        cand = rho + step
        if not lo < cand < hi:
            cand = 0.5 * (lo + hi)
        cval = g(cand)
        if cval > 0.0:
            lo = cand
        else:
            hi = cand
        rho, val = cand, cval
    raise ConvergenceError("energy multiplier solve did not converge in 100 iterations")


def image_update(
    codes: np.ndarray,
    labels: np.ndarray,
    W: np.ndarray,
    operators: list[FROperator],
    kspace: KSpaceData,
    mu: float,
    energy_bound: float,
    patch_side: int,
    return_info: bool = False,
):
    """Exact minimizer of the patch + data-fidelity least squares problem
    under ||y||_2 <= energy_bound, for stride-1 wrap-around patches."""
    H, Wd = kspace.dims
    P = H * Wd
    n = patch_side * patch_side
    idx, _ = patch_index_matrix(kspace.dims, patch_side, stride=1, wrap=True)

    backproj = np.zeros(P, dtype=np.complex128)
    for k, op in enumerate(operators):
        cols = np.flatnonzero(labels == k)
        if cols.size == 0:
            continue
        U = apply_transpose(op, W.conj().T @ codes[:, cols])
        np.add.at(backproj, idx[:, cols].ravel(), U.ravel())

    rhs = dft2(backproj.reshape(H, Wd)).ravel()
    rhs[kspace.sample_set] += mu * kspace.measurements
    diag = np.full(P, float(n))
    diag[kspace.sample_set] += mu

    weights = np.abs(rhs) ** 2
    rho = _solve_energy_multiplier(weights, diag, energy_bound**2)
    y = idft2((rhs / (diag + rho)).reshape(H, Wd))
    if return_info:
        return y, rho
    return y


def make_mask(
    dims: tuple[int, int], scheme: str, acceleration: float, seed: int
) -> np.ndarray:
    """Variable-density k-space sampling pattern as sorted flat indices.

    "cartesian" keeps ceil(H/acceleration) full rows, "random2d" keeps
    ceil(H*W/acceleration) individual frequencies; the DC component is
    always sampled and selection probability falls off as (1 + d)^-2 in
    normalized distance d from DC.
    """
    if acceleration < 1:
        raise ValueError("acceleration must be >= 1")
    H, W = dims
    rng = np.random.default_rng(seed)
    if scheme == "cartesian":
        num_rows = math.ceil(H / acceleration)
        freq = np.arange(H)
        d = np.minimum(freq, H - freq) / (H / 2)
        prob = (1.0 + d) ** -2
        prob[0] = 0.0
        rest = np.array([], dtype=np.int64)
        if num_rows > 1:
            rest = rng.choice(H - 1, size=num_rows - 1, replace=False, p=prob[1:] / prob[1:].sum()) + 1
        rows = np.concatenate([[0], rest])
        flat = (rows[:, None] * W + np.arange(W)[None, :]).ravel()
    elif scheme == "random2d":
        num = math.ceil(H * W / acceleration)
        r, c = np.divmod(np.arange(H * W), W)
        dr = np.minimum(r, H - r) / (H / 2)
        dc = np.minimum(c, W - c) / (W / 2)
        d = np.hypot(dr, dc) / math.sqrt(2.0)
        prob = (1.0 + d) ** -2
        prob[0] = 0.0
        rest = np.array([], dtype=np.int64)
        if num > 1:
            rest = rng.choice(H * W - 1, size=num - 1, replace=False, p=prob[1:] / prob[1:].sum()) + 1
        flat = np.concatenate([[0], rest])
    else:
        raise ValueError(f"unknown sampling scheme {scheme!r}")
    return np.sort(flat.astype(np.int64))


def default_mu(y0: np.ndarray) -> float:
    peak = float(np.max(np.abs(y0)))
    return 1e-2 * max(peak, 1.0) ** 2


def default_energy_bound(y0: np.ndarray, P: int, M: int) -> float:
    return 1.05 * float(np.linalg.norm(y0)) * math.sqrt(P / M)


def _sparsity_schedule(s_target: int, iters: int, rampup: int) -> list[int]:
    floor_s = max(s_target // 4, 1)
    out = []
    for t in range(iters):
        if t >= rampup - 1 or rampup <= 1:
            out.append(s_target)
        else:
            out.append(int(round(floor_s + (s_target - floor_s) * t / (rampup - 1))))
    return out


def reconstruct(
    kspace: KSpaceData, config: MriConfig
) -> tuple[np.ndarray, MriTrace]:
    """Alternating blind reconstruction from undersampled k-space,
    starting at the zero-filled estimate."""
    H, Wd = kspace.dims
    P = H * Wd
    side = config.patch_side
    n = side * side
    if side > min(H, Wd):
        raise ValueError("patch side exceeds image dims")

    y = zero_filled(kspace)
    mu = config.mu if config.mu is not None else default_mu(y)
    L = (
        config.energy_bound
        if config.energy_bound is not None
        else default_energy_bound(y, P, kspace.sample_set.size)
    )
    num_angles = config.num_angles or 4 * side
    ops = enumerate_candidates(side, num_angles)
    if not 1 <= config.num_operators <= len(ops):
        raise ValueError("num_operators out of range")
    W = dct_matrix(side).astype(np.complex128)
    s_target = max(int(round(config.s_fraction * n * P)), 1)
    rampup = config.sparsity_rampup_iters or math.ceil(config.iters / 3)
    schedule = _sparsity_schedule(s_target, config.iters, rampup)
    idx, _ = patch_index_matrix(kspace.dims, side, stride=1, wrap=True)

    trace = MriTrace()
    for it, s_t in enumerate(schedule):
        patches = y.ravel()[idx]
        errs = _stacked_cluster_errors(W, ops, patches, s_t)
        labels = np.argmin(errs, axis=0)
        if len(ops) > config.num_operators:
            sizes = np.bincount(labels, minlength=len(ops))
            keep = elimination_keep_indices(sizes, config.num_operators)
            ops = [ops[i] for i in keep]
            labels = np.argmin(errs[keep], axis=0)
        A = rotate_columns(patches, ops, labels)
        X = global_threshold(W @ A, s_t)
        W = unitary_update(A, X)
        y = image_update(X, labels, W, ops, kspace, mu, L, side)

        new_patches = y.ravel()[idx]
        resid = W @ rotate_columns(new_patches, ops, labels) - X
        sparsify_err = float(np.sum(np.abs(resid) ** 2))
        data_resid = dft2(y).ravel()[kspace.sample_set] - kspace.measurements
        fidelity = float(np.sum(np.abs(data_resid) ** 2))
        trace.objective.append(mu * fidelity + sparsify_err)
        trace.fidelity.append(fidelity)
        trace.sparsity.append(s_t)
        trace.unitarity_error.append(
            float(np.linalg.norm(W.conj().T @ W - np.eye(n)))
        )
    return y, trace
