"""Seeded synthetic datasets used by the experiment scripts and the test suite."""
from __future__ import annotations

import numpy as np

from .preprocess import Dataset

CLUSTER_CENTERS = np.array([[0.0, 0.0], [1.5, 0.0], [0.75, 1.3]])


def three_gaussians(seed: int, n: int = 300, sigma: float = 0.05) -> Dataset:
    """``n`` 2-D points split evenly over three well separated Gaussian blobs."""
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % len(CLUSTER_CENTERS)
    x = CLUSTER_CENTERS[labels] + rng.normal(0.0, sigma, (n, 2))
    return Dataset(("x", "y"), x)


def planted_means(seed: int, n: int = 98, dim: int = 10) -> Dataset:
    """Columns with means dim, dim-1, ..., 1 and unit-variance Gaussian noise."""
    rng = np.random.default_rng(seed)
    means = np.arange(dim, 0, -1, dtype=float)
    x = means + rng.normal(0.0, 1.0, (n, dim))
    return Dataset(tuple(f"v{j + 1}" for j in range(dim)), x)


def likert_survey(seed: int, n: int = 98, dim: int = 10) -> Dataset:
    """Respondent-like answers on a 1..9 scale with per-variable preference levels."""
    rng = np.random.default_rng(seed)
    level = rng.uniform(2.0, 8.0, dim)
    x = np.clip(np.rint(level + rng.normal(0.0, 1.5, (n, dim))), 1, 9)
    return Dataset(tuple(f"factor_{j + 1}" for j in range(dim)), x)
