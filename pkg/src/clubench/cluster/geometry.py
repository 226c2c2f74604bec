"""Distances and the data-driven scale factors for eps / gamma / bandwidth."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .config import METRICS


class ClusteringError(RuntimeError):
    """A clustering run failed; the sweep records the cell as missing."""


_SCIPY_METRIC = {"euclidean": "euclidean", "manhattan": "cityblock", "cosine": "cosine"}


def _check_metric(metric: str) -> str:
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}")
    return _SCIPY_METRIC[metric]


def check_cosine_rows(X: np.ndarray) -> None:
    if np.any(np.linalg.norm(X, axis=1) == 0):
        raise ClusteringError("cosine distance is undefined for a zero vector")


def pairwise_distance(X, metric: str = "euclidean", Y=None) -> np.ndarray:
    """Dense distance matrix between rows of X (and Y, if given)."""
    name = _check_metric(metric)
    X = np.asarray(X, dtype=np.float64)
    Y = X if Y is None else np.asarray(Y, dtype=np.float64)
    if metric == "cosine":
        check_cosine_rows(X)
        check_cosine_rows(Y)
    D = cdist(X, Y, metric=name)
    if metric == "cosine":
        np.clip(D, 0.0, 2.0, out=D)
    if Y is X:
        D = 0.5 * (D + D.T)
        np.fill_diagonal(D, 0.0)
    return D


@dataclass(frozen=True)
class ScaleBases:
    eps_base: float
    gamma_base: float


def scale_bases(X, metric: str = "euclidean", sample_cap: int = 2000, seed: int = 0) -> ScaleBases:
    """Mean pairwise distance (under ``metric``) and 1 / (2 median squared L2 distance).

    Computed exactly when ``n <= sample_cap``, else on a seeded uniform
    subsample of ``sample_cap`` rows.
    """
    name = _check_metric(metric)
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if n < 2:
        raise ValueError("scale bases need at least two samples")
    if n > sample_cap:
        idx = np.sort(np.random.default_rng(seed).choice(n, size=sample_cap, replace=False))
        X = X[idx]
    if metric == "cosine":
        check_cosine_rows(X)
    d = pdist(X, metric=name)
    sq = pdist(X, metric="sqeuclidean")
    eps_base = float(d.mean())
    med = float(np.median(sq))
    if not eps_base > 0 or not med > 0:
        raise ClusteringError("degenerate geometry: pairwise distances vanish")
    return ScaleBases(eps_base=eps_base, gamma_base=1.0 / (2.0 * med))


def rbf_kernel(X, gamma: float, Y=None) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    Y = X if Y is None else Y
    sq = cdist(X, Y, metric="sqeuclidean")
    return np.exp(-gamma * sq)
