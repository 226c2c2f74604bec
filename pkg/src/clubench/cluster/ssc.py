"""Sparse subspace clustering.

Every sample is expressed as a sparse combination of the others,

    min_C  ||C||_1 + (lambda / 2) ||X - X C||_F^2   s.t.  diag(C) = 0,

with samples as columns of X.  The lasso is solved jointly for all samples by
ADMM on the split ``A = C``; the affinity |C| + |C|^T is then clustered
spectrally.
"""

from __future__ import annotations

import numpy as np

from .geometry import ClusteringError
from .spectral import spectral_clustering

RHO = 1.0
MAX_ITER = 200
TOL = 1e-4


def _soft(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def self_representation(X, lam, rho=RHO, max_iter=MAX_ITER, tol=TOL):
    """ADMM for the zero-diagonal lasso self-representation. ``X`` is n x m."""
    X = np.asarray(X, dtype=np.float64)
    n, m = X.shape
    G = X @ X.T  # Gram matrix of samples
    # (lam G + rho I)^-1 through the smaller of the two Gram systems
    if m < n:
        inner = np.linalg.solve(rho / lam * np.eye(m) + X.T @ X, X.T)
        system_inv = (np.eye(n) - X @ inner) / rho
    else:
        system_inv = np.linalg.inv(lam * G + rho * np.eye(n))
    lamG = lam * G
    C = np.zeros((n, n))
    # dual warm start at its optimal value for C = 0; from a zero dual the
    # iterates stall near A = C = 0 for many steps before leaving it
    U = lamG / rho
    for _ in range(max_iter):
        A = system_inv @ (lamG + rho * (C - U))
        C_new = _soft(A + U, 1.0 / rho)
        np.fill_diagonal(C_new, 0.0)
        U += A - C_new
        primal = np.abs(A - C_new).max()
        change = np.abs(C_new - C).max()
        C = C_new
        if primal < tol and change < tol:
            break
    return C


def ssc(X, K, lam, seed=0):
    X = np.asarray(X, dtype=np.float64)
    if X.shape[1] < 2:
        raise ClusteringError("subspace clustering needs at least two features")
    C = self_representation(X, lam)
    W = np.abs(C) + np.abs(C).T
    if not np.any(W > 0):
        raise ClusteringError("self-representation is identically zero")
    return spectral_clustering(W, K, seed=seed)
