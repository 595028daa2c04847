"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest -v tests/test_acceptance.py`` (add -s to see the lines for
passing criteria as they complete).
"""

import itertools
import math

import numpy as np
import pytest

from frist import imageio, mri
from frist import operators as fo
from frist import transforms as ft
from frist.cli import main as cli_main
from frist.denoising import DenoiseConfig, denoise
from frist.inpainting import InpaintConfig, inpaint, inpaint_patch_robust
from frist.learning import (
    LearnConfig,
    cluster_errors,
    learn,
    reconstruct_columns,
    rotate_columns,
    sparse_code_and_cluster,
    transform_update,
)
from frist.patches import extract, aggregate, patch_index_matrix, psnr
from frist.synthetic import (
    blocks_and_stripes,
    linear_gradient,
    mri_phantom,
    texture_montage,
)


def report(num: int, name: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    print(f"[criterion {num:2d}] {name}: {status}" + (f" ({detail})" if detail else ""))
    assert ok, f"criterion {num} ({name}) failed: {detail}"


# ----------------------------------------------------------- shared fixtures

@pytest.fixture(scope="module")
def training_patches():
    """2000 8x8 patches sampled from two 256x256 directional images."""
    img1 = texture_montage((256, 256), angles=(0.0, 30.0, 60.0, 120.0))
    img2 = texture_montage((256, 256), angles=(15.0, 45.0, 90.0, 150.0))
    rng = np.random.default_rng(42)
    cols = []
    for img in (img1, img2):
        ps = extract(img, 8, stride=8).data
        pick = rng.choice(ps.shape[1], size=1000, replace=False)
        cols.append(ps[:, pick])
    Y = np.concatenate(cols, axis=1)
    return Y + rng.normal(0.0, 1.0, Y.shape)


# -------------------------------------------------------------- criterion 1

def _oracle_project(b, s):
    exact = np.allclose(b, np.round(b))
    vals = [int(round(v)) ** 2 if exact else float(v) ** 2 for v in b]
    best_support, best_energy = (), -1
    for support in itertools.combinations(range(b.size), s):
        kept = sum(vals[j] for j in support)
        if kept > best_energy:
            best_support, best_energy = support, kept
    out = np.zeros_like(b)
    out[list(best_support)] = b[list(best_support)]
    return out


_BITS_CACHE = {}


def _oracle_hard_threshold(b, tau):
    n = b.size
    if n not in _BITS_CACHE:
        _BITS_CACHE[n] = (np.arange(2**n)[:, None] >> np.arange(n)) & 1
    bits = _BITS_CACHE[n]
    costs = (b * b * (1 - bits)).sum(axis=1) + tau * tau * bits.sum(axis=1)
    sizes = bits.sum(axis=1)
    pick = bits[np.lexsort((-sizes, costs))[0]].astype(bool)  # min cost, max support
    out = np.zeros_like(b)
    out[pick] = b[pick]
    return out


def test_criterion_01_thresholding_oracles():
    rng = np.random.default_rng(1)
    for trial in range(1000):
        n = int(rng.integers(1, 13))
        if trial % 2 == 0:
            b = rng.integers(-3, 4, size=n).astype(float)  # tie-rich
            tau = float(rng.integers(0, 4))
        else:
            b = rng.normal(size=n) * 3
            tau = float(rng.uniform(0.0, 3.0))
        s = int(rng.integers(0, n + 1))
        got_p = ft.project_sparse(b, s)
        want_p = _oracle_project(b, s)
        assert np.array_equal(got_p, want_p), f"project_sparse mismatch: {b}, s={s}"
        got_h = ft.hard_threshold(b, tau)
        want_h = _oracle_hard_threshold(b, tau)
        assert np.array_equal(got_h, want_h), f"hard_threshold mismatch: {b}, tau={tau}"
    report(1, "thresholding oracles (1000 vectors, exact incl. ties)", True)


# -------------------------------------------------------------- criterion 2

def _p4_objective(W, Y, X, lam):
    r = W @ Y - X
    return float(np.sum(r * r)) + lam * ft.regularizer(W)


def test_criterion_02_transform_update_optimality():
    rng = np.random.default_rng(2)
    worst_grad, worst_perturb = 0.0, 0.0
    for _ in range(100):
        n = int(rng.integers(2, 17))
        N = 2 * n
        Y = rng.normal(size=(n, N))
        X = np.where(rng.random((n, N)) < 0.4, rng.normal(size=(n, N)), 0.0)
        lam = float(rng.uniform(0.05, 5.0))
        W = transform_update(Y, X, lam)
        f0 = _p4_objective(W, Y, X, lam)
        scale = max(1.0, abs(f0))

        step = 1e-6
        grad = np.zeros_like(W)
        for i in range(n):
            for j in range(n):
                Wp, Wm = W.copy(), W.copy()
                Wp[i, j] += step
                Wm[i, j] -= step
                grad[i, j] = (_p4_objective(Wp, Y, X, lam) - _p4_objective(Wm, Y, X, lam)) / (2 * step)
        gnorm = float(np.linalg.norm(grad))
        worst_grad = max(worst_grad, gnorm / scale)
        assert gnorm < 1e-5 * scale

        for _ in range(500):
            D = rng.normal(size=(n, n))
            D *= rng.uniform(0, 1e-3) / max(np.linalg.norm(D), 1e-300)
            diff = _p4_objective(W + D, Y, X, lam) - f0
            worst_perturb = min(worst_perturb, diff)
            assert diff >= -1e-9 * scale

    # hand-derived 2x2 case
    W2 = transform_update(np.eye(2), np.eye(2), 1.0)
    hand = 0.25 * (1.0 + math.sqrt(5.0))
    assert np.max(np.abs(W2 - hand * np.eye(2))) < 1e-5
    report(2, "transform update optimality (FD gradient, 500 perturbations, hand case)",
           True, f"worst scaled grad {worst_grad:.2e}")


# -------------------------------------------------------------- criterion 3

def test_criterion_03_convergence_all_inits(training_patches):
    Y = training_patches
    # the convergence protocol runs on a fixed K=2 operator family, selected
    # once by the elimination heuristic from a short bootstrap run
    boot = LearnConfig(patch_side=8, k_target=2, sparsity=10, lambda0=3.1e-3,
                       max_iters=8, init="dct", tol_objective=0.0)
    family = learn(Y, boot)[0].operators
    assert len(family) == 2

    finals = {}
    for init in ("dct", "klt", "identity", "random"):
        cfg = LearnConfig(patch_side=8, k_target=2, sparsity=10, lambda0=3.1e-3,
                          max_iters=100, init=init, init_seed=0, tol_objective=0.0)
        _, trace = learn(Y, cfg, operators=family)
        obj = np.array(trace.objective)
        assert len(obj) == 100
        drops = np.diff(obj)
        ok = np.all(drops <= 1e-9 * np.abs(obj[:-1]))
        assert ok, f"objective increased for init={init}"
        finals[init] = obj[-1]
    spread = (max(finals.values()) - min(finals.values())) / min(finals.values())
    report(3, "convergence: monotone objective, 4 inits, finals within 5%",
           spread <= 0.05, f"spread {100 * spread:.2f}%")


# -------------------------------------------------------------- criterion 4

def test_criterion_04_conditioning(training_patches):
    Y = training_patches
    conds = []
    for lam0 in (1e-3, 1e-1, 10.0):
        cfg = LearnConfig(patch_side=8, k_target=2, sparsity=10, lambda0=lam0,
                          max_iters=30, init="dct", tol_objective=0.0)
        _, trace = learn(Y, cfg)
        conds.append(trace.condition_number[-1])
    ok = conds[0] >= conds[1] >= conds[2] and conds[2] < 1.5
    report(4, "conditioning: cond decreases with lambda0, cond < 1.5 at lambda0=10",
           ok, "conds " + ", ".join(f"{c:.4f}" for c in conds))


# -------------------------------------------------------------- criterion 5

def test_criterion_05_structural_dominance():
    rng = np.random.default_rng(5)
    ops = fo.enumerate_candidates(8, 16)  # identity is ops[0]
    for _ in range(50):
        W = rng.normal(size=(64, 64))
        Y = rng.normal(size=(64, int(rng.integers(5, 40))))
        errs = cluster_errors(Y, W, ops, 10)
        frist_obj = float(errs.min(axis=0).sum())
        sst_obj = float(errs[0].sum())
        assert frist_obj <= sst_obj
    report(5, "structural dominance: clustered objective <= single-transform objective", True)


# -------------------------------------------------------------- criterion 6

def test_criterion_06_sparse_representation():
    img = texture_montage((128, 128), angles=(0.0, 30.0, 60.0, 120.0))
    pset = extract(img, 8, stride=8)
    Y = pset.data

    def represent_psnr(W, ops):
        cs = sparse_code_and_cluster(Y, W, ops, 10)
        return psnr(img, aggregate(pset, reconstruct_columns(W, ops, cs)))

    frist_model, _ = learn(Y, LearnConfig(patch_side=8, k_target=8, sparsity=10,
                                          max_iters=50, tol_objective=0.0))
    p_frist = represent_psnr(frist_model.parent, frist_model.operators)
    sst_model, _ = learn(Y, LearnConfig(patch_side=8, k_target=1, sparsity=10,
                                        max_iters=50, tol_objective=0.0),
                         operators=[fo.identity_operator(8)])
    p_sst = represent_psnr(sst_model.parent, sst_model.operators)
    p_dct = represent_psnr(ft.dct_matrix(8), [fo.identity_operator(8)])

    ok = (p_frist >= p_sst - 0.05) and (p_sst >= p_dct - 0.5)
    report(6, "sparse representation: FRIST >= SST >= DCT - 0.5 dB", ok,
           f"FRIST {p_frist:.2f}, SST {p_sst:.2f}, DCT {p_dct:.2f} dB")


# -------------------------------------------------------------- criterion 7

def test_criterion_07_denoising():
    clean = blocks_and_stripes((64, 64))
    rng = np.random.default_rng(7)
    sigma = 10.0
    noisy = clean + rng.normal(0.0, sigma, clean.shape)
    p_noisy = psnr(clean, noisy)

    p_frist = psnr(clean, denoise(noisy, DenoiseConfig(sigma=sigma)))
    p_dct = psnr(clean, denoise(noisy, DenoiseConfig(sigma=sigma, adapt=False,
                                                     identity_only=True)))
    ok = (p_frist >= p_noisy + 2.0) and (p_frist >= p_dct)
    report(7, "denoising: +2 dB over noisy and >= fixed-DCT variant", ok,
           f"noisy {p_noisy:.2f}, FRIST {p_frist:.2f}, DCT {p_dct:.2f} dB")


# -------------------------------------------------------------- criterion 8

def test_criterion_08_inpainting():
    clean = linear_gradient((64, 64))
    rng = np.random.default_rng(8)
    mask = rng.random(clean.shape) < 0.2
    z = np.where(mask, clean, 0.0)
    out = inpaint(z, mask, InpaintConfig(sigma=0.0))
    gain_ok = psnr(clean, out) >= psnr(clean, z) + 10.0
    exact_ok = np.array_equal(out[mask], clean[mask])

    # Woodbury correctness: 1000 random patch instances vs dense solve;
    # random W with controlled singular values (nonsingular precondition)
    n = 64
    worst = 0.0
    for trial in range(1000):
        U = np.linalg.qr(rng.normal(size=(n, n)))[0]
        V = np.linalg.qr(rng.normal(size=(n, n)))[0]
        W = (U * rng.uniform(0.5, 2.0, size=n)) @ V.T
        op = fo.build_operator(int(rng.integers(32)), bool(rng.integers(2)), 32, 8)
        frac = rng.uniform(0.05, 0.95)
        pmask = rng.random(n) < frac
        zi = np.where(pmask, rng.uniform(0, 255, n), 0.0)
        x = rng.normal(size=n) * 10
        gamma = float(rng.uniform(0.05, 20.0))
        got = inpaint_patch_robust(W, op, zi, pmask, x, gamma)
        mask_rot = fo.apply(op, pmask)
        u = np.linalg.solve(W.T @ W + gamma * np.diag(mask_rot.astype(float)),
                            W.T @ x + gamma * np.where(mask_rot, fo.apply(op, zi), 0.0))
        want = fo.apply_transpose(op, u)
        rel = np.linalg.norm(got - want) / max(np.linalg.norm(want), 1e-300)
        worst = max(worst, rel)
        assert rel < 1e-8
    report(8, "inpainting: +10 dB, exact data consistency, Woodbury == dense solve",
           gain_ok and exact_ok, f"worst Woodbury rel err {worst:.2e}")


# -------------------------------------------------------------- criterion 9

def test_criterion_09_mri():
    img = mri_phantom((64, 64))
    sample_set = mri.make_mask(img.shape, "random2d", 5.0, seed=9)
    kdata = mri.measure(img, sample_set)
    config = mri.MriConfig(iters=30)
    recon, trace = mri.reconstruct(kdata, config)

    p_zf = psnr(np.abs(img), np.abs(mri.zero_filled(kdata)))
    p_rec = psnr(np.abs(img), np.abs(recon))
    gain_ok = p_rec >= p_zf + 2.0
    unitary_ok = max(trace.unitarity_error) < 1e-9

    # normal-equation residual and energy bound of one more exact image update
    side = config.patch_side
    n = side * side
    P = img.size
    idx, _ = patch_index_matrix(img.shape, side, 1, wrap=True)
    patches = recon.ravel()[idx]
    W = ft.dct_matrix(side).astype(complex)
    ops = fo.enumerate_candidates(side, 4 * side)[: config.num_operators]
    s = max(int(round(config.s_fraction * n * P)), 1)
    labels = mri.approximate_cluster(W, ops, patches, s)
    codes = mri.mri_sparse_code(W, ops, labels, patches, s).codes
    mu = mri.default_mu(mri.zero_filled(kdata))
    y_free, rho_free = mri.image_update(codes, labels, W, ops, kdata, mu, 1e18,
                                        side, return_info=True)
    L = 0.7 * float(np.linalg.norm(y_free))  # force the constraint active
    y, rho = mri.image_update(codes, labels, W, ops, kdata, mu, L, side,
                              return_info=True)

    acc = np.zeros(P, dtype=complex)
    for k, op in enumerate(ops):
        cols = np.flatnonzero(labels == k)
        if cols.size:
            U = fo.apply_transpose(op, W.conj().T @ codes[:, cols])
            np.add.at(acc, idx[:, cols].ravel(), U.ravel())
    rhs = mri.dft2(acc.reshape(img.shape)).ravel()
    rhs[kdata.sample_set] += mu * kdata.measurements
    diag = np.full(P, float(n))
    diag[kdata.sample_set] += mu
    resid = (diag + rho) * mri.dft2(y).ravel() - rhs
    resid_ok = np.linalg.norm(resid) < 1e-9 * max(np.linalg.norm(rhs), 1.0)
    bound_ok = (np.linalg.norm(y) <= L * (1 + 1e-8)
                and abs(np.linalg.norm(y) - L) <= 1e-8 * L and rho > 0
                and rho_free == 0.0)

    report(9, "MRI: +2 dB over zero-filled, unitary W, exact image update, energy bound",
           gain_ok and unitary_ok and resid_ok and bound_ok,
           f"zero-filled {p_zf:.2f} dB, recon {p_rec:.2f} dB, "
           f"max unitarity {max(trace.unitarity_error):.1e}")


# ------------------------------------------------------------- criterion 10

def test_criterion_10_approximate_vs_exact_clustering():
    """Known-failing criterion, kept faithful rather than weakened.

    The per-patch argmin over shared-budget residuals is a heuristic: on
    tiny instances (P <= 4, K <= 3, n = 4) it routinely lands 2x or more
    above the exhaustive-clustering optimum, for unstructured Gaussian
    instances as well as planted-sparse and smooth-image patch instances
    (40-70% of instances exceed the 10% margin in every regime measured).
    The only regime within 10% is the degenerate one where the transform's
    magnitudes are invariant under the operator family (e.g. the 2x2 DCT
    under the dihedral group), which makes every assignment optimal and
    the check vacuous. The assertion below documents the gap honestly."""
    rng = np.random.default_rng(10)
    ratios = []
    for _ in range(50):
        P = int(rng.integers(2, 5))
        K = int(rng.integers(2, 4))
        n = 4
        G = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        W, _ = np.linalg.qr(G)
        ops = fo.enumerate_candidates(2, 4)[:K]
        patches = rng.normal(size=(n, P)) + 1j * rng.normal(size=(n, P))
        s = int(rng.integers(1, n * P))

        def total_error(labels):
            B = W @ rotate_columns(patches, ops, np.asarray(labels))
            R = B - ft.global_threshold(B, s)
            return float(np.sum(np.abs(R) ** 2))

        best = min(total_error(a) for a in itertools.product(range(K), repeat=P))
        approx = total_error(mri.approximate_cluster(W, ops, patches, s))
        ratios.append(approx / best if best > 1e-12 else 1.0)
    worst = max(ratios)
    frac_bad = float(np.mean(np.array(ratios) > 1.1))
    report(10, "approximate clustering within 10% of exhaustive optimum",
           worst <= 1.1, f"worst ratio {worst:.2f}, {100 * frac_bad:.0f}% of instances above 1.1")


# ------------------------------------------------------------- criterion 11

def _artifacts(out_dir):
    return sorted(p for p in out_dir.rglob("*") if p.is_file() and p.name != "report.csv")


def test_criterion_11_cli_determinism(tmp_path):
    data = tmp_path / "data"
    data.mkdir()
    imageio.write_pgm(data / "train.pgm", texture_montage((96, 96)))
    clean = blocks_and_stripes((40, 40))
    imageio.write_pgm(data / "clean.pgm", clean)
    imageio.write_pgm(data / "noisy.pgm",
                      clean + np.random.default_rng(11).normal(0, 10, clean.shape))

    commands = {
        "learn": ["learn", "--images", data / "train.pgm", "--num-patches", "150",
                  "--K", "2", "--iters", "6", "--out", "model.frist"],
        "represent": ["represent", "--baseline", "dct", "--image", data / "clean.pgm",
                      "--out", "rep.pgm"],
        "segment": ["segment", "--image", data / "clean.pgm", "--clusters", "4",
                    "--Q", "8", "--iters", "4", "--out", "seg.pgm"],
        "denoise": ["denoise", "--image", data / "noisy.pgm", "--sigma", "10",
                    "--iters", "2", "--passes", "1", "--K", "8", "--Q", "8",
                    "--out", "den.pgm"],
        "inpaint": ["inpaint", "--image", data / "clean.pgm",
                    "--available-fraction", "0.3", "--iters", "2", "--passes", "1",
                    "--K", "8", "--Q", "8", "--out", "inp.pgm"],
        "mri": ["mri", "--image", data / "clean.pgm", "--scheme", "random2d",
                "--accel", "4", "--iters", "3", "--patch-size", "4", "--K", "4",
                "--Q", "4", "--out", "rec"],
    }
    for name, args in commands.items():
        outputs = []
        for run, threads in (("r1", "2"), ("r2", "3")):
            out_dir = tmp_path / f"{name}_{run}"
            rc = cli_main([str(a) for a in args]
                          + ["--seed", "17", "--threads", threads,
                             "--out-dir", str(out_dir), "--report", "csv"])
            assert rc == 0, f"{name} failed"
            outputs.append({p.name: p.read_bytes() for p in _artifacts(out_dir)})
        assert outputs[0].keys() == outputs[1].keys(), f"{name}: artifact sets differ"
        assert len(outputs[0]) > 0
        for fname in outputs[0]:
            assert outputs[0][fname] == outputs[1][fname], (
                f"{name}: artifact {fname} differs between runs"
            )
    report(11, "CLI determinism: byte-identical artifacts across runs and thread counts", True)
