"""The conventional clustering toolbox behind one ``fit_predict`` contract."""

from __future__ import annotations

from typing import Optional

import numpy as np

from .agglomerative import agglomerative
from .birch import birch
from .config import ALGORITHMS, NO_K, SEARCH_SPACE, AlgorithmConfig, ConfigError, algorithm_of
from .dbscan import dbscan, noise_as_cluster
from .geometry import ClusteringError, ScaleBases, pairwise_distance, rbf_kernel, scale_bases
from .gmm import gmm
from .kernel_kmeans import kernel_kmeans
from .kmeans import kmeans
from .kpc import kpc
from .meanshift import mean_shift
from .spectral import knn_affinity, rbf_affinity, spectral_clustering
from .ssc import ssc

__all__ = [
    "ALGORITHMS", "NO_K", "SEARCH_SPACE", "AlgorithmConfig", "ClusteringError", "ConfigError",
    "ScaleBases", "algorithm_of", "compact_labels", "fit_predict", "pairwise_distance",
    "scale_bases",
]

# Scale bases are a property of the dataset, not of the repeat.
SCALE_SEED = 0


def compact_labels(labels) -> np.ndarray:
    """Renumber labels to 0..C-1 in order of first appearance."""
    labels = np.asarray(labels)
    _, first, inv = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.empty_like(first)
    rank[np.argsort(first, kind="stable")] = np.arange(first.size)
    return rank[inv].astype(np.int64)


def _bases(X, metric, bases: Optional[dict]):
    if bases is not None and metric in bases:
        return bases[metric]
    return scale_bases(X, metric, seed=SCALE_SEED)


def fit_predict(cfg: AlgorithmConfig, X, seed: int = 0, bases: Optional[dict] = None) -> np.ndarray:
    """Cluster ``X`` under one bound configuration.

    ``bases`` optionally caches :class:`ScaleBases` per metric name.  Any
    numerical failure surfaces as :class:`ClusteringError`.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    p = cfg.params
    algo = cfg.algorithm
    K = cfg.K
    if algo not in NO_K:
        if K is None:
            raise ConfigError(f"{algo} requires K")
        if K > n:
            raise ConfigError(f"K={K} exceeds the number of samples {n}")

    try:
        if algo == "KMeans":
            labels = kmeans(X, K, init=p["init"], metric=p["metric"], n_init=p["n_init"],
                            max_iter=p["max_iter"], seed=seed).labels
        elif algo == "KernelKMeans":
            gamma = p["gamma"] * _bases(X, "euclidean", bases).gamma_base
            labels = kernel_kmeans(rbf_kernel(X, gamma), K, init=p["init"],
                                   max_iter=p["max_iter"], seed=seed).labels
        elif algo == "AggClu":
            labels = agglomerative(X, K, metric=p["metric"], linkage_method=p["linkage"])
        elif algo == "DBSCAN":
            eps = p["eps"] * _bases(X, p["metric"], bases).eps_base
            labels = noise_as_cluster(dbscan(X, eps, p["min_sample"], metric=p["metric"]))
        elif algo == "BIRCH":
            threshold = p["threshold"] * _bases(X, "euclidean", bases).eps_base
            labels = birch(X, K, threshold, p["branching_factor"])
        elif algo == "GMM":
            labels = gmm(X, K, covariance_type=p["covariance_type"],
                         init_params=p["init_params"], seed=seed).labels
        elif algo == "SpeClu":
            if p["affinity"] == "knn":
                A = knn_affinity(X, p["k"])
            else:
                A = rbf_affinity(X, p["gamma"] * _bases(X, "euclidean", bases).gamma_base)
            labels = spectral_clustering(A, K, seed=seed)
        elif algo == "MeanShift":
            bandwidth = p["bandwidth"] * _bases(X, "euclidean", bases).eps_base
            labels = mean_shift(X, bandwidth, min_bin_freq=p["min_bin_freq"])
        elif algo == "kPC":
            labels = kpc(X, K, p["d"], seed=seed).labels
        elif algo == "SSC":
            labels = ssc(X, K, p["lambda"], seed=seed)
        else:  # pragma: no cover - config validation rejects this earlier
            raise ConfigError(f"unknown algorithm {algo!r}")
    except ClusteringError:
        raise
    except (np.linalg.LinAlgError, FloatingPointError, ValueError, ArithmeticError) as exc:
        raise ClusteringError(f"{cfg.config_id}: {exc}") from exc

    labels = np.asarray(labels)
    if labels.shape != (n,):
        raise ClusteringError(f"{cfg.config_id}: malformed label vector")
    return compact_labels(labels)
