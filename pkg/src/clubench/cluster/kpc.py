"""k-plane clustering: K affine subspaces of dimension d fitted by alternation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kmeans import kmeans

MAX_ITER = 50


@dataclass
class KPCResult:
    labels: np.ndarray
    history: list = field(default_factory=list)
    n_iter: int = 0


def fit_subspace(block, d):
    """Mean and orthonormal basis (d columns) of the best affine d-flat."""
    mu = block.mean(axis=0)
    if d == 0 or block.shape[0] < 2:
        return mu, np.zeros((block.shape[1], 0))
    _, _, vt = np.linalg.svd(block - mu, full_matrices=False)
    return mu, vt[:d].T


def residuals(X, subspaces):
    """n x K squared distances to every affine subspace."""
    out = np.empty((X.shape[0], len(subspaces)))
    for k, (mu, B) in enumerate(subspaces):
        diff = X - mu
        proj = diff @ B
        out[:, k] = np.maximum((diff * diff).sum(axis=1) - (proj * proj).sum(axis=1), 0.0)
    return out


def kpc(X, K, d, seed=0, max_iter=MAX_ITER):
    X = np.asarray(X, dtype=np.float64)
    m = X.shape[1]
    d = int(max(0, min(d, m - 1)))
    labels = kmeans(X, K, init="kmeans++", n_init=10, seed=seed).labels
    history = []
    it = 0
    for it in range(1, max_iter + 1):
        subspaces = []
        for k in range(K):
            block = X[labels == k]
            if block.shape[0] == 0:
                # reseed the empty plane at the point worst served so far
                worst = int(np.argmax(residuals(X, subspaces[:1] or [fit_subspace(X, d)])[:, 0]))
                block = X[[worst]]
            subspaces.append(fit_subspace(block, d))
        R = residuals(X, subspaces)
        history.append(float(R[np.arange(X.shape[0]), labels].sum()))
        new = R.argmin(axis=1)
        history.append(float(R[np.arange(X.shape[0]), new].sum()))
        if np.array_equal(new, labels):
            break
        labels = new
    return KPCResult(labels=labels, history=history, n_iter=it)
