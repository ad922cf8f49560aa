"""Topology preservation and U-matrix contrast on three Gaussian blobs, over many seeds.

    python scripts/cluster_recovery.py [--seeds 100] [--mode sequential|batch]
"""
import argparse
import time

import numpy as np

from somdelphi.datasets import three_gaussians
from somdelphi.som import Topology, TrainingSchedule, data_range, init_grid, topographic_error, train
from somdelphi.viz import boundary_contrast, umatrix

ap = argparse.ArgumentParser()
ap.add_argument("--seeds", type=int, default=100)
ap.add_argument("--mode", default="sequential")
ap.add_argument("--rows", type=int, default=8)
ap.add_argument("--cols", type=int, default=8)
args = ap.parse_args()

topo = Topology("hexagonal", args.rows, args.cols)
te, contrast, improved = [], [], 0
t0 = time.perf_counter()
for seed in range(args.seeds):
    ds = three_gaussians(seed)
    grid = init_grid(topo, 2, seed, data_range(ds))
    trained, rep = train(grid, ds, TrainingSchedule.default(args.rows, args.cols, seed=seed, mode=args.mode))
    te.append(topographic_error(trained, ds))
    contrast.append(boundary_contrast(umatrix(trained)))
    improved += rep.final_mse < rep.initial_mse

te, contrast = np.array(te), np.array(contrast)
print(f"{args.seeds} seeds in {time.perf_counter() - t0:.1f}s ({args.mode})")
print(f"topographic error: median {np.median(te):.3f}, max {te.max():.3f}, <=0.15 in {(te <= 0.15).sum()}")
print(f"U-matrix contrast: min {contrast.min():.2f}, >=2 in {(contrast >= 2).sum()}")
print(f"both criteria in {((te <= 0.15) & (contrast >= 2)).sum()} seeds; MSE improved in {improved}")
