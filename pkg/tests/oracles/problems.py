"""Deterministic optimization problems shared by the reference-freezing
scripts and the solver tests.

Each generator rebuilds the exact same data from its seed, so the frozen
JSON files only need to carry problem names and reference values.
"""
from __future__ import annotations

import numpy as np


def svm_binary(seed: int, n: int, n_features: int, spread: float) -> tuple[np.ndarray, np.ndarray]:
    """Two overlapping Gaussian clouds, labels +1/-1, n split evenly."""
    rng = np.random.default_rng(seed)
    half = n // 2
    pos = rng.normal(loc=spread, scale=1.0, size=(half, n_features))
    neg = rng.normal(loc=-spread, scale=1.0, size=(n - half, n_features))
    x = np.vstack([pos, neg])
    y = np.concatenate([np.ones(half), -np.ones(n - half)])
    perm = rng.permutation(n)
    return x[perm], y[perm]


# name, seed, n, n_features, spread, C, kernel (C stays inside the
# declared search domain so the configs validate)
SVM_PROBLEMS = [
    ("lin_sep", 11, 40, 4, 1.5, 1.0, "linear"),
    ("lin_tight", 12, 40, 4, 0.4, 0.1, "linear"),
    ("lin_strong_reg", 13, 40, 6, 0.8, 0.001, "linear"),
    ("rbf_mixed", 21, 40, 4, 0.6, 1.0, "rbf"),
    ("rbf_small_c", 22, 40, 8, 0.3, 0.01, "rbf"),
    ("poly_mixed", 31, 40, 3, 0.5, 1.0, "polynomial"),
    ("poly_tiny_c", 32, 40, 5, 0.7, 0.0001, "polynomial"),
]


def lsvm_multiclass(seed: int, n_per: int, n_features: int, k: int,
                    spread: float, imbalance: bool) -> tuple[np.ndarray, np.ndarray]:
    """k Gaussian blobs with integer labels 1..k; optional 3:1 imbalance."""
    rng = np.random.default_rng(seed)
    xs, ys = [], []
    for c in range(k):
        n_c = n_per if not imbalance or c % 2 == 0 else max(4, n_per // 3)
        center = rng.normal(scale=spread, size=n_features)
        xs.append(rng.normal(size=(n_c, n_features)) + center)
        ys.append(np.full(n_c, c + 1))
    x = np.vstack(xs)
    y = np.concatenate(ys)
    perm = rng.permutation(len(y))
    return x[perm], y[perm]


# name, seed, n_per, n_features, k, spread, C, class_weight
LSVM_PROBLEMS = [
    ("bin_wide", 41, 30, 4, 2, 2.0, 1.0, "none"),
    ("bin_balanced_w", 42, 24, 5, 2, 1.0, 0.1, "balanced"),
    ("tri_plain", 43, 20, 4, 3, 2.5, 1.0, "none"),
    ("tri_imbalanced", 44, 24, 6, 3, 2.0, 0.1, "balanced"),
    ("quad_small_c", 45, 15, 3, 4, 3.0, 0.01, "none"),
]


def standardize(x: np.ndarray) -> np.ndarray:
    """Zero-mean unit-variance columns; near-constant columns pass through."""
    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    scale = np.where(scale < 1e-12, 1.0, scale)
    return (x - mean) / scale
