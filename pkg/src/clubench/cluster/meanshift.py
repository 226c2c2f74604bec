"""Flat-kernel mean shift with binned seeding."""

from __future__ import annotations

from collections import Counter

import numpy as np
from scipy.spatial import cKDTree

MAX_ITER = 300


def bin_seeds(X, bin_size, min_bin_freq=1):
    """Grid-bin centres holding at least ``min_bin_freq`` points, in sorted order."""
    binned = np.round(X / bin_size).astype(np.int64)
    counts = Counter(map(tuple, binned))
    seeds = sorted(b for b, c in counts.items() if c >= min_bin_freq)
    if not seeds:
        return X.copy()
    return np.asarray(seeds, dtype=np.float64) * bin_size


def mean_shift(X, bandwidth, min_bin_freq=1, max_iter=MAX_ITER):
    """Labels from converged modes; modes closer than ``bandwidth / 2`` are merged.

    Every point is labelled by its nearest surviving mode, so there is no noise.
    """
    X = np.asarray(X, dtype=np.float64)
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    tree = cKDTree(X)
    seeds = bin_seeds(X, bandwidth, min_bin_freq)
    stop = 1e-3 * bandwidth
    modes, support = [], []
    for mean in seeds:
        hits = 0
        for _ in range(max_iter):
            idx = tree.query_ball_point(mean, r=bandwidth)
            if not idx:
                break
            new = X[idx].mean(axis=0)
            hits = len(idx)
            done = np.linalg.norm(new - mean) < stop
            mean = new
            if done:
                break
        if hits:
            modes.append(mean)
            support.append(hits)
    if not modes:
        # no seed ever saw a point: fall back to one mode per sample
        modes, support = list(X), [1] * len(X)
    modes = np.asarray(modes)
    support = np.asarray(support)
    order = np.lexsort((np.arange(len(modes)), -support))
    kept: list[np.ndarray] = []
    for i in order:
        if all(np.linalg.norm(modes[i] - c) >= bandwidth / 2.0 for c in kept):
            kept.append(modes[i])
    centers = np.asarray(kept)
    _, labels = cKDTree(centers).query(X, k=1)
    return np.asarray(labels, dtype=np.int64)
