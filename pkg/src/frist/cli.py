"""Command line interface.

Subcommands: learn, represent, segment, denoise, inpaint, mri. Every
command accepts --seed / --threads / --out-dir / --report; all randomized
choices are driven by the seed, so repeated runs produce byte-identical
artifacts. Exit codes: 0 success, 2 configuration error, 3 I/O error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import imageio, mri
from .denoising import DenoiseConfig, denoise
from .inpainting import InpaintConfig, inpaint
from .learning import (
    LearnConfig,
    learn,
    reconstruct_columns,
    sparse_code_and_cluster,
)
from .model_io import load_model, save_model
from .operators import identity_operator
from .parallel import effective_threads
from .patches import aggregate, extract, patch_index_matrix, psnr
from .transforms import SingularTransformError, dct_matrix

logger = logging.getLogger(__name__)

REPORT_HEADER = ["command", "input", "output", "psnr_in", "psnr_out", "objective"]


def _g6(value) -> str:
    if value is None:
        return ""
    if math.isinf(value):
        return "inf"
    return f"{value:.6g}"


def _configure_logging() -> None:
    level = {"quiet": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}.get(
        os.environ.get("FRIST_LOG", "info"), logging.INFO
    )
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _out_path(args, name: str) -> Path:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    p = Path(name)
    return p if p.is_absolute() else out_dir / p


def _emit_report(args, command, input_path, output_path, psnr_in=None, psnr_out=None, objective=None):
    row = [command, str(input_path), str(output_path), _g6(psnr_in), _g6(psnr_out), _g6(objective)]
    if args.report == "csv":
        path = _out_path(args, "report.csv")
        new = not path.exists() or path.stat().st_size == 0
        with open(path, "a", newline="") as f:
            w = csv.writer(f)
            if new:
                w.writerow(REPORT_HEADER)
            w.writerow(row)
    else:
        print(" ".join(f"{k}={v}" for k, v in zip(REPORT_HEADER, row) if v != ""))


def load_image(path) -> np.ndarray:
    suffix = Path(path).suffix.lower()
    if suffix == ".pgm":
        return imageio.read_pgm(path)
    if suffix == ".pfm":
        return imageio.read_pfm(path)
    if suffix == ".cpx":
        return imageio.read_cpx(path)
    raise ValueError(f"unsupported image format: {path}")


def _sample_training_patches(images, patch_side, num_patches, rng) -> np.ndarray:
    anchors = []
    for idx, img in enumerate(images):
        H, W = img.shape
        for r in range(0, H - patch_side + 1, patch_side):
            for c in range(0, W - patch_side + 1, patch_side):
                anchors.append((idx, r, c))
    if not anchors:
        raise ValueError("images are smaller than one patch")
    take = min(num_patches, len(anchors))
    if take < num_patches:
        logger.warning("only %d non-overlapping patches available (%d requested)", take, num_patches)
    chosen = rng.choice(len(anchors), size=take, replace=False)
    cols = np.empty((patch_side * patch_side, take))
    for j, a in enumerate(np.sort(chosen)):
        idx, r, c = anchors[a]
        cols[:, j] = images[idx][r : r + patch_side, c : c + patch_side].ravel()
    return cols


def cmd_learn(args) -> None:
    rng = np.random.default_rng(args.seed)
    side = args.patch_size
    if args.patches:
        Y = imageio.read_pfm(args.patches)
        if Y.shape[0] != side * side:
            raise ValueError(
                f"patch file rows ({Y.shape[0]}) do not match patch size {side}x{side}"
            )
    elif args.images:
        Y = _sample_training_patches(
            [load_image(p) for p in args.images], side, args.num_patches, rng
        )
    else:
        raise ValueError("either --images or --patches is required")

    config = LearnConfig(
        patch_side=side,
        k_target=args.K,
        num_angles=args.Q,
        sparsity=args.sparsity,
        lambda0=args.lambda0,
        max_iters=args.iters,
        init=args.init,
        init_seed=args.seed,
        tol_objective=args.tol,
    )
    operators = [identity_operator(side, args.Q)] if args.sst else None
    model, trace = learn(Y, config, operators=operators)

    out = _out_path(args, args.out)
    save_model(out, model)
    trace_path = Path(str(out) + ".trace.csv")
    with open(trace_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["iteration", "objective", "sparsification_error", "condition_number", "num_operators", "cluster_sizes"])
        for i, (obj, se, cond, sizes) in enumerate(
            zip(trace.objective, trace.sparsification_error, trace.condition_number, trace.cluster_sizes)
        ):
            w.writerow([i, f"{obj:.17g}", f"{se:.17g}", f"{cond:.17g}", len(sizes), ";".join(map(str, sizes))])
    print(f"model written to {out} ({model.num_operators} operators), trace to {trace_path}")
    _emit_report(args, "learn", args.patches or args.images[0], out, objective=trace.objective[-1])


def _crop_to_grid(image: np.ndarray, side: int) -> np.ndarray:
    H, W = image.shape
    return image[: H - H % side, : W - W % side]


def cmd_represent(args) -> None:
    image = load_image(args.image)
    if args.baseline == "dct":
        side = args.patch_size
        W = dct_matrix(side)
        ops = [identity_operator(side)]
        sparsity = args.sparsity or 10
    else:
        if not args.model:
            raise ValueError("--model is required unless --baseline dct")
        model = load_model(args.model)
        side = model.patch_side
        W = model.parent
        ops = (
            [identity_operator(side, model.num_angles)]
            if args.baseline == "sst"
            else model.operators
        )
        sparsity = args.sparsity or model.sparsity

    cropped = _crop_to_grid(image, side)
    pset = extract(cropped, side, stride=side)
    codes = sparse_code_and_cluster(pset.data, W, ops, sparsity)
    recon = aggregate(pset, reconstruct_columns(W, ops, codes))
    quality = psnr(cropped, recon)
    out = ""
    if args.out:
        out = _out_path(args, args.out)
        imageio.write_pgm(out, recon)
    print(f"representation PSNR: {_g6(quality)} dB (sparsity {sparsity})")
    _emit_report(args, "represent", args.image, out, psnr_out=quality)


def cmd_segment(args) -> None:
    image = load_image(args.image)
    side = args.patch_size
    pset = extract(image, side, stride=1)
    Y = pset.data - pset.data.mean(axis=0, keepdims=True)
    config = LearnConfig(
        patch_side=side,
        k_target=args.clusters,
        num_angles=args.Q,
        sparsity=args.sparsity,
        lambda0=args.lambda0,
        max_iters=args.iters,
        init_seed=args.seed,
    )
    model, _ = learn(Y, config)
    codes = sparse_code_and_cluster(Y, model.parent, model.operators, config.sparsity)

    K = len(model.operators)
    H, Wd = image.shape
    idx, _ = patch_index_matrix(image.shape, side, stride=1, wrap=False)
    votes = np.zeros((H * Wd, K), dtype=np.int64)
    for k in range(K):
        cols = np.flatnonzero(codes.labels == k)
        if cols.size:
            np.add.at(votes[:, k], idx[:, cols].ravel(), 1)
    label_map = np.argmax(votes, axis=1).reshape(H, Wd)
    levels = np.rint(255.0 * label_map / max(K - 1, 1))

    out = _out_path(args, args.out)
    imageio.write_pgm(out, levels)
    print(f"label map ({K} classes) written to {out}")
    _emit_report(args, "segment", args.image, out)


def cmd_denoise(args) -> None:
    z = load_image(args.image)
    config = DenoiseConfig(
        sigma=args.sigma,
        patch_side=args.patch_size,
        num_operators=args.K,
        num_angles=args.Q,
        error_const=args.C,
        tau0=args.tau0,
        lambda0=args.lambda0,
        iters_per_pass=args.iters,
        passes=args.passes,
        sigma_decay=args.decay,
        adapt=args.baseline != "dct",
        identity_only=args.baseline in ("dct", "sst"),
    )
    restored = denoise(z, config)
    out = _out_path(args, args.out)
    imageio.write_pgm(out, restored)
    psnr_in = psnr_out = None
    if args.reference:
        ref = load_image(args.reference)
        psnr_in, psnr_out = psnr(ref, z), psnr(ref, restored)
        print(f"PSNR: noisy {_g6(psnr_in)} dB -> denoised {_g6(psnr_out)} dB")
    else:
        print(f"denoised image written to {out}")
    _emit_report(args, "denoise", args.image, out, psnr_in, psnr_out)


def cmd_inpaint(args) -> None:
    image = load_image(args.image)
    rng = np.random.default_rng(args.seed)
    reference = load_image(args.reference) if args.reference else None
    if args.mask:
        mask = imageio.read_pgm(args.mask) > 127
        z = np.where(mask, image, 0.0)
    elif args.available_fraction is not None:
        # treat the input as ground truth: synthesize the mask, corrupt, restore
        mask = rng.random(image.shape) < args.available_fraction
        z = np.where(mask, image, 0.0)
        if args.sigma > 0:
            z[mask] += rng.normal(0.0, args.sigma, size=int(mask.sum()))
        reference = image if reference is None else reference
        mask_path = Path(str(_out_path(args, args.out)) + ".mask.pgm")
        imageio.write_pgm(mask_path, np.where(mask, 255.0, 0.0))
    else:
        raise ValueError("either --mask or --available-fraction is required")

    config = InpaintConfig(
        sigma=args.sigma,
        patch_side=args.patch_size,
        num_operators=args.K,
        num_angles=args.Q,
        tau_base=args.tau_base,
        gamma0=args.gamma0,
        lambda0=args.lambda0,
        iters=args.iters,
        passes=args.passes,
        adapt=args.baseline != "dct",
        identity_only=args.baseline in ("dct", "sst"),
        threads=effective_threads(args.threads),
    )
    restored = inpaint(z, mask, config)
    out = _out_path(args, args.out)
    imageio.write_pgm(out, restored)
    psnr_in = psnr_out = None
    if reference is not None:
        psnr_in, psnr_out = psnr(reference, z), psnr(reference, restored)
        print(f"PSNR: corrupted {_g6(psnr_in)} dB -> inpainted {_g6(psnr_out)} dB")
    else:
        print(f"inpainted image written to {out}")
    _emit_report(args, "inpaint", args.image, out, psnr_in, psnr_out)


def cmd_mri(args) -> None:
    reference = None
    if args.kspace:
        if not args.mask:
            raise ValueError("--mask is required with --kspace")
        full = imageio.read_cpx(args.kspace)
        mask = imageio.read_pgm(args.mask) > 127
        if mask.shape != full.shape:
            raise ValueError("k-space and mask dims differ")
        sample_set = np.flatnonzero(mask.ravel())
        kdata = mri.KSpaceData(full.ravel()[sample_set], sample_set, full.shape)
        if args.reference:
            reference = load_image(args.reference)
    elif args.image:
        img = load_image(args.image).astype(np.complex128)
        sample_set = mri.make_mask(img.shape, args.scheme, args.accel, args.seed)
        kdata = mri.measure(img, sample_set)
        reference = img
        mask_img = np.zeros(img.shape)
        mask_img.ravel()[sample_set] = 255.0
        imageio.write_pgm(Path(str(_out_path(args, args.out)) + ".mask.pgm"), mask_img)
    else:
        raise ValueError("either --kspace or --image is required")

    config = mri.MriConfig(
        patch_side=args.patch_size,
        num_operators=args.K,
        num_angles=args.Q,
        s_fraction=args.s_fraction,
        mu=args.mu,
        energy_bound=args.L,
        iters=args.iters,
    )
    recon, trace = mri.reconstruct(kdata, config)

    out = _out_path(args, args.out)
    imageio.write_cpx(Path(str(out) + ".cpx"), recon)
    imageio.write_pgm(Path(str(out) + "_mag.pgm"), np.abs(recon))
    psnr_in = psnr_out = None
    if reference is not None:
        ref_mag = np.abs(reference)
        zf_mag = np.abs(mri.zero_filled(kdata))
        psnr_in = psnr(ref_mag, zf_mag)
        psnr_out = psnr(ref_mag, np.abs(recon))
        imageio.write_pgm(Path(str(out) + "_err.pgm"), np.abs(np.abs(recon) - ref_mag))
        print(f"PSNR: zero-filled {_g6(psnr_in)} dB -> reconstructed {_g6(psnr_out)} dB")
    else:
        print(f"reconstruction written to {out}.cpx")
    _emit_report(args, "mri", args.kspace or args.image, out, psnr_in, psnr_out,
                 objective=trace.objective[-1])


def _add_common(sub):
    sub.add_argument("--seed", type=int, default=0, help="seed for all randomized choices")
    sub.add_argument("--threads", type=int, default=0, help="worker threads (0 = all cores)")
    sub.add_argument("--out-dir", default=".", help="directory for output artifacts")
    sub.add_argument("--report", choices=["csv", "text"], default="text")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="frist", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("learn", help="learn a transform model from images or a patch file")
    p.add_argument("--images", nargs="+", help="training images (PGM/PFM)")
    p.add_argument("--patches", help="PFM file holding an n x N patch matrix")
    p.add_argument("--patch-size", type=int, default=8)
    p.add_argument("--num-patches", type=int, default=10000)
    p.add_argument("--K", type=int, default=2, help="number of operators to retain")
    p.add_argument("--Q", type=int, default=None, help="number of rotation angles (default 4*patch size)")
    p.add_argument("--sparsity", type=int, default=10)
    p.add_argument("--lambda0", type=float, default=3.1e-3)
    p.add_argument("--init", choices=["dct", "klt", "identity", "random"], default="dct")
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--sst", action="store_true", help="single square transform: identity operator only")
    p.add_argument("--out", required=True, help="output model file")
    _add_common(p)
    p.set_defaults(func=cmd_learn)

    p = subs.add_parser("represent", help="sparse-code and reconstruct non-overlapping patches")
    p.add_argument("--model", help="learned model file")
    p.add_argument("--image", required=True)
    p.add_argument("--sparsity", type=int, default=None)
    p.add_argument("--patch-size", type=int, default=8, help="patch size for --baseline dct")
    p.add_argument("--baseline", choices=["dct", "sst"], default=None)
    p.add_argument("--out", help="optional reconstructed PGM")
    _add_common(p)
    p.set_defaults(func=cmd_represent)

    p = subs.add_parser("segment", help="cluster pixels by operator membership")
    p.add_argument("--image", required=True)
    p.add_argument("--clusters", type=int, default=4)
    p.add_argument("--patch-size", type=int, default=8)
    p.add_argument("--sparsity", type=int, default=10)
    p.add_argument("--lambda0", type=float, default=3.1e-3)
    p.add_argument("--iters", type=int, default=30)
    p.add_argument("--Q", type=int, default=None)
    p.add_argument("--out", required=True, help="label map PGM")
    _add_common(p)
    p.set_defaults(func=cmd_segment)

    p = subs.add_parser("denoise", help="patch-based denoising")
    p.add_argument("--image", required=True, help="noisy image")
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--C", type=float, default=1.04, help="error condition constant")
    p.add_argument("--K", type=int, default=64)
    p.add_argument("--Q", type=int, default=None)
    p.add_argument("--patch-size", type=int, default=8)
    p.add_argument("--tau0", type=float, default=0.01)
    p.add_argument("--lambda0", type=float, default=3.1e-3)
    p.add_argument("--iters", type=int, default=12, help="iterations per pass")
    p.add_argument("--passes", type=int, default=2)
    p.add_argument("--decay", type=float, default=0.7, help="per-pass noise decay")
    p.add_argument("--baseline", choices=["dct", "sst"], default=None)
    p.add_argument("--reference", help="clean image for PSNR reporting")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_denoise)

    p = subs.add_parser("inpaint", help="restore missing pixels")
    p.add_argument("--image", required=True, help="corrupted image (or clean with --available-fraction)")
    p.add_argument("--mask", help="PGM mask, 255 = available")
    p.add_argument("--available-fraction", type=float, default=None)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--K", type=int, default=64)
    p.add_argument("--Q", type=int, default=None)
    p.add_argument("--patch-size", type=int, default=8)
    p.add_argument("--tau-base", type=float, default=1.5)
    p.add_argument("--gamma0", type=float, default=3.0)
    p.add_argument("--lambda0", type=float, default=3.1e-3)
    p.add_argument("--iters", type=int, default=10)
    p.add_argument("--passes", type=int, default=3)
    p.add_argument("--baseline", choices=["dct", "sst"], default=None)
    p.add_argument("--reference")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_inpaint)

    p = subs.add_parser("mri", help="blind compressed-sensing MRI reconstruction")
    p.add_argument("--kspace", help="full k-space .cpx with unsampled entries zero")
    p.add_argument("--mask", help="PGM mask of sampled frequencies (with --kspace)")
    p.add_argument("--image", help="complex image (.cpx) or PGM to retrospectively undersample")
    p.add_argument("--scheme", choices=["cartesian", "random2d"], default="random2d")
    p.add_argument("--accel", type=float, default=5.0)
    p.add_argument("--K", type=int, default=32)
    p.add_argument("--Q", type=int, default=None)
    p.add_argument("--patch-size", type=int, default=6)
    p.add_argument("--s-fraction", type=float, default=0.05)
    p.add_argument("--mu", type=float, default=None)
    p.add_argument("--L", type=float, default=None)
    p.add_argument("--iters", type=int, default=30)
    p.add_argument("--reference", help="reference image for the error map")
    p.add_argument("--out", required=True, help="output prefix")
    _add_common(p)
    p.set_defaults(func=cmd_mri)

    return parser


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
        return 0
    except (ValueError,) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3
    except (SingularTransformError, mri.ConvergenceError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
