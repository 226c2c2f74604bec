"""Kernel KMeans via the kernel trick.

Each cluster centre lives in feature space as a weight vector over samples,
so no explicit feature map is ever formed.  Initial centres are single
samples picked by kmeans++ or uniformly at random in kernel-distance space.
"""

from __future__ import annotations

import numpy as np

from .geometry import ClusteringError
from .kmeans import KMeansResult


def _distances(G, diag, W):
    # ||phi(x_i) - sum_j W_kj phi(x_j)||^2
    cross = G @ W.T
    self_term = np.einsum("kj,kj->k", W @ G, W)
    return np.maximum(diag[:, None] - 2.0 * cross + self_term[None, :], 0.0)


def _plusplus(G, diag, K, rng):
    n = G.shape[0]
    chosen = [int(rng.integers(n))]
    best = np.maximum(diag - 2.0 * G[:, chosen[0]] + diag[chosen[0]], 0.0)
    for _ in range(1, K):
        total = best.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=best / total))
        else:
            free = np.setdiff1d(np.arange(n), chosen)
            nxt = int(rng.choice(free)) if free.size else int(rng.integers(n))
        chosen.append(nxt)
        best = np.minimum(best, np.maximum(diag - 2.0 * G[:, nxt] + diag[nxt], 0.0))
    return np.array(chosen)


def kernel_lloyd(G, seeds, max_iter=500):
    G = np.asarray(G, dtype=np.float64)
    n = G.shape[0]
    K = len(seeds)
    diag = np.diag(G).copy()
    W = np.zeros((K, n))
    W[np.arange(K), seeds] = 1.0
    labels = None
    history = []
    it = 0
    for it in range(1, max_iter + 1):
        D = _distances(G, diag, W)
        new = D.argmin(axis=1)
        own = D[np.arange(n), new]
        history.append(float(own.sum()))
        if labels is not None and np.array_equal(new, labels):
            break
        if labels is not None and history[-1] >= history[-2]:
            break
        labels = new
        taken = set()
        W = np.zeros((K, n))
        for k in range(K):
            members = np.flatnonzero(labels == k)
            if members.size:
                W[k, members] = 1.0 / members.size
            else:
                order = np.argsort(-own, kind="stable")
                pick = next((int(i) for i in order if int(i) not in taken), int(order[0]))
                taken.add(pick)
                W[k, pick] = 1.0
    return KMeansResult(labels=labels, centers=W, objective=history[-1], history=history, n_iter=it)


def kernel_kmeans(G, K, init="kmeans++", n_init=10, max_iter=500, seed=0):
    G = np.asarray(G, dtype=np.float64)
    n = G.shape[0]
    if K < 1 or K > n:
        raise ClusteringError(f"cannot form K={K} clusters from {n} samples")
    diag = np.diag(G).copy()
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        if init == "kmeans++":
            seeds = _plusplus(G, diag, K, rng)
        elif init == "random":
            seeds = rng.choice(n, size=K, replace=False)
        else:
            raise ValueError(f"unknown init {init!r}")
        res = kernel_lloyd(G, seeds, max_iter=max_iter)
        if best is None or res.objective < best.objective:
            best = res
    return best
