#!/usr/bin/env python3
"""Desk-scale convergence study of the transform learner.

Samples patches from two directional montage images, fixes a K=2 operator
family via the elimination bootstrap, then learns from four different parent
initializations and records the objective, sparsification error, cluster
sizes, and conditioning per iteration. Writes one CSV per initialization and
an optional comparison plot.

Usage: python scripts/convergence_study.py [--out-dir results] [--iters 100]
"""

import argparse
import csv
from pathlib import Path

import numpy as np

from frist.learning import LearnConfig, learn
from frist.patches import extract
from frist.synthetic import texture_montage


def sample_patches(rng, num_per_image=1000, noise=1.0):
    imgs = [
        texture_montage((256, 256), angles=(0.0, 30.0, 60.0, 120.0)),
        texture_montage((256, 256), angles=(15.0, 45.0, 90.0, 150.0)),
    ]
    cols = []
    for img in imgs:
        ps = extract(img, 8, stride=8).data
        pick = rng.choice(ps.shape[1], size=num_per_image, replace=False)
        cols.append(ps[:, pick])
    Y = np.concatenate(cols, axis=1)
    return Y + rng.normal(0.0, noise, Y.shape)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="results/convergence")
    ap.add_argument("--iters", type=int, default=100)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--plot", action="store_true", help="also write a PNG (needs matplotlib)")
    args = ap.parse_args()

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    Y = sample_patches(rng)
    print(f"training matrix: {Y.shape[0]} x {Y.shape[1]}")

    boot = LearnConfig(patch_side=8, k_target=2, sparsity=10, lambda0=3.1e-3,
                       max_iters=8, init="dct", tol_objective=0.0)
    family = learn(Y, boot)[0].operators
    print("fixed operator family:",
          [(op.angle_index, op.flip) for op in family])

    traces = {}
    for init in ("dct", "klt", "identity", "random"):
        cfg = LearnConfig(patch_side=8, k_target=2, sparsity=10, lambda0=3.1e-3,
                          max_iters=args.iters, init=init, init_seed=args.seed,
                          tol_objective=0.0)
        model, trace = learn(Y, cfg, operators=family)
        traces[init] = trace
        path = out_dir / f"trace_{init}.csv"
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["iteration", "objective", "sparsification_error",
                        "condition_number", "cluster_sizes"])
            for i in range(len(trace.objective)):
                w.writerow([i, trace.objective[i], trace.sparsification_error[i],
                            trace.condition_number[i],
                            ";".join(map(str, trace.cluster_sizes[i]))])
        print(f"{init:>8}: final objective {trace.objective[-1]:.6g}, "
              f"cond {trace.condition_number[-1]:.4f} -> {path}")

    finals = [t.objective[-1] for t in traces.values()]
    print(f"final objective spread: {(max(finals) - min(finals)) / min(finals):.2%}")

    if args.plot:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, axes = plt.subplots(1, 3, figsize=(14, 4))
        for init, trace in traces.items():
            axes[0].semilogy(trace.objective, label=init)
            axes[1].semilogy(trace.sparsification_error, label=init)
        sizes = np.array(traces["dct"].cluster_sizes)
        for k in range(sizes.shape[1]):
            axes[2].plot(sizes[:, k], label=f"cluster {k}")
        axes[0].set_title("objective")
        axes[1].set_title("sparsification error")
        axes[2].set_title("cluster sizes (dct init)")
        for ax in axes:
            ax.set_xlabel("iteration")
            ax.legend()
        fig.tight_layout()
        fig.savefig(out_dir / "convergence.png", dpi=120)
        print(f"plot -> {out_dir / 'convergence.png'}")


if __name__ == "__main__":
    main()
