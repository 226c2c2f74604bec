"""Normalised spectral clustering (Ng, Jordan and Weiss)."""

from __future__ import annotations

import numpy as np
from scipy import sparse
from scipy.linalg import eigh
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, eigsh
from scipy.spatial import cKDTree

from .geometry import ClusteringError, rbf_kernel
from .kmeans import kmeans

DENSE_LIMIT = 3000


def knn_affinity(X, k):
    """Binary k-nearest-neighbour graph, symmetrised by union, zero diagonal."""
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    k = int(min(k, n - 1))
    if k < 1:
        raise ClusteringError("kNN graph needs at least two samples")
    _, idx = cKDTree(X).query(X, k=k + 1)
    rows, cols = [], []
    for i in range(n):
        nbrs = [int(j) for j in idx[i] if j != i][:k]
        rows.extend([i] * len(nbrs))
        cols.extend(nbrs)
    A = sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    A = A.maximum(A.T).tocsr()
    A.setdiag(0.0)
    A.eliminate_zeros()
    return A


def rbf_affinity(X, gamma):
    A = rbf_kernel(X, gamma)
    np.fill_diagonal(A, 0.0)
    return A


def spectral_embedding(A, K, seed=0):
    """Rows of the top-K eigenvectors of D^-1/2 A D^-1/2, scaled to unit length."""
    n = A.shape[0]
    deg = np.asarray(A.sum(axis=1)).ravel()
    if not np.any(deg > 0):
        raise ClusteringError("affinity graph has no edges")
    inv_sqrt = np.where(deg > 0, 1.0 / np.sqrt(np.where(deg > 0, deg, 1.0)), 0.0)
    if sparse.issparse(A):
        Dm = sparse.diags(inv_sqrt)
        M = (Dm @ A @ Dm).tocsr()
    else:
        M = inv_sqrt[:, None] * np.asarray(A) * inv_sqrt[None, :]
    M = 0.5 * (M + M.T)
    try:
        if n <= DENSE_LIMIT or K >= n - 1:
            dense = M.toarray() if sparse.issparse(M) else M
            _, vecs = eigh(dense, subset_by_index=[n - K, n - 1])
        else:
            v0 = np.random.default_rng(seed).uniform(-1, 1, n)
            _, vecs = eigsh(M, k=K, which="LA", v0=v0, maxiter=5000)
    except (ArpackError, ArpackNoConvergence, np.linalg.LinAlgError) as exc:
        raise ClusteringError(f"eigensolver failed: {exc}") from exc
    if not np.all(np.isfinite(vecs)):
        raise ClusteringError("eigensolver returned non-finite vectors")
    norms = np.linalg.norm(vecs, axis=1, keepdims=True)
    return np.divide(vecs, norms, out=np.zeros_like(vecs), where=norms > 0)


def spectral_clustering(A, K, seed=0, n_init=10):
    emb = spectral_embedding(A, K, seed=seed)
    return kmeans(emb, K, init="kmeans++", metric="euclidean", n_init=n_init, seed=seed).labels
