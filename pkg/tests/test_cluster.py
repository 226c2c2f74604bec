import numpy as np
import pytest

from clubench.cluster import (ALGORITHMS, AlgorithmConfig, ClusteringError, ConfigError,
                              compact_labels, fit_predict, pairwise_distance, scale_bases)
from clubench.cluster.agglomerative import agglomerative
from clubench.cluster.birch import CFTree, birch
from clubench.cluster.dbscan import dbscan, noise_as_cluster
from clubench.cluster.gmm import gmm
from clubench.cluster.kernel_kmeans import kernel_lloyd
from clubench.cluster.kmeans import kmeans, lloyd
from clubench.cluster.kpc import kpc
from clubench.cluster.meanshift import mean_shift
from clubench.cluster.spectral import knn_affinity, rbf_affinity
from clubench.cluster.ssc import self_representation, ssc
from clubench.metrics import clustering_accuracy
from clubench.sweep import enumerate_grid
from oracles import mst_cut, same_partition
from synth import blobs, rings, subspaces


# ---------------------------------------------------------------- configs

def test_config_roundtrip_and_validation():
    cfg = AlgorithmConfig("DBSCAN", {"eps": 0.4, "min_sample": 5, "metric": "cosine"})
    assert AlgorithmConfig.from_id(cfg.config_id) == cfg
    with pytest.raises(ConfigError):
        AlgorithmConfig("DBSCAN", {"eps": 0.55, "min_sample": 5, "metric": "cosine"})
    with pytest.raises(ConfigError):
        AlgorithmConfig("DBSCAN", {"eps": 0.4, "min_sample": 5, "metric": "cosine"}, K=3)
    with pytest.raises(ConfigError):
        AlgorithmConfig("KMeans", {"init": "kmeans++"})
    with pytest.raises(ConfigError):
        AlgorithmConfig("Nope", {})
    with pytest.raises(ConfigError):
        fit_predict(enumerate_grid("KMeans").configs[0], np.zeros((4, 2)))  # K missing


def test_every_grid_config_roundtrips():
    for algo in ALGORITHMS:
        for cfg in enumerate_grid(algo).configs:
            assert AlgorithmConfig.from_id(cfg.config_id).config_id == cfg.config_id


# ---------------------------------------------------------------- geometry

def test_scale_base_examples():
    assert scale_bases(np.array([[0.0, 0.0], [3.0, 0.0]]), "euclidean").eps_base == pytest.approx(3.0)
    assert scale_bases(np.array([[0.0], [2.0]]), "euclidean").gamma_base == pytest.approx(1 / 8)
    X = np.arange(5.0)[:, None]
    assert scale_bases(X, "euclidean").eps_base == pytest.approx(2.0)
    with pytest.raises(ClusteringError, match="degenerate geometry"):
        scale_bases(np.ones((5, 2)), "euclidean")


def test_scale_bases_subsample_deterministic():
    X = np.random.default_rng(0).normal(size=(2500, 3))
    a = scale_bases(X, "manhattan", sample_cap=500, seed=3)
    assert a == scale_bases(X, "manhattan", sample_cap=500, seed=3)


def test_pairwise_examples():
    X = np.array([[0.0, 0.0], [3.0, 4.0]])
    assert pairwise_distance(X, "euclidean")[0, 1] == pytest.approx(5.0)
    assert pairwise_distance(X, "manhattan")[0, 1] == pytest.approx(7.0)
    E = np.eye(2)
    assert pairwise_distance(E, "cosine")[0, 1] == pytest.approx(1.0)
    for metric in ("euclidean", "manhattan", "cosine"):
        D = pairwise_distance(np.array([[1.0, 2.0], [1.0, 2.0], [-1.0, 0.5]]), metric)
        assert np.allclose(D, D.T) and np.all(np.diag(D) == 0)
    with pytest.raises(ClusteringError):
        pairwise_distance(X, "cosine")


# ---------------------------------------------------------------- contract

def _one_config_each():
    return [enumerate_grid(a).configs[0] for a in ALGORITHMS]


@pytest.mark.parametrize("cfg", _one_config_each(), ids=lambda c: c.algorithm)
def test_determinism_and_valid_partition(cfg):
    X, _ = blobs(n=90, K=3, m=3, seed=1)
    bound = cfg.with_k(3)
    a = fit_predict(bound, X, seed=5)
    b = fit_predict(bound, X, seed=5)
    assert np.array_equal(a, b)
    assert a.shape == (90,)
    C = a.max() + 1
    assert set(a.tolist()) == set(range(C))
    if bound.K is not None:
        assert C <= 3


def test_kmeans_separated():
    X = np.array([[0.0, 0.0], [0.0, 1.0], [100.0, 0.0], [100.0, 1.0]])
    cfg = AlgorithmConfig("KMeans", {"init": "kmeans++", "metric": "euclidean", "n_init": 10,
                                     "max_iter": 500}, K=2)
    assert clustering_accuracy([0, 0, 1, 1], fit_predict(cfg, X)) == 1.0


def test_dbscan_tiny_eps_single_noise_cluster():
    X = np.random.default_rng(0).uniform(size=(100, 2))
    cfg = AlgorithmConfig("DBSCAN", {"eps": 0.001, "min_sample": 5, "metric": "euclidean"})
    labels = fit_predict(cfg, X)
    assert labels.max() == 0


def test_dbscan_noise_label_and_border():
    X = np.array([[0.0], [0.1], [0.2], [0.3], [5.0]])
    raw = dbscan(X, eps=0.15, min_samples=3)
    assert raw[-1] == -1 and len(set(raw[:4].tolist())) == 1
    assert noise_as_cluster(raw).tolist() == [0, 0, 0, 0, 1]


def test_compact_labels():
    assert compact_labels([5, 5, 2, 9, 2]).tolist() == [0, 0, 1, 2, 1]


# ---------------------------------------------------------------- algorithm properties

def test_lloyd_objective_non_increasing():
    X, _ = blobs(n=200, K=5, sigma=3.0, seed=2)
    rng = np.random.default_rng(0)
    for metric in ("euclidean", "manhattan"):
        res = lloyd(X, X[rng.choice(200, 5, replace=False)], metric=metric)
        assert np.all(np.diff(res.history) <= 1e-9)


def test_gmm_loglik_non_decreasing():
    X, _ = blobs(n=300, K=3, sigma=2.5, seed=3)
    for cov in ("full", "spherical"):
        res = gmm(X, 3, covariance_type=cov, init_params="random", seed=1)
        assert np.all(np.diff(res.history) >= -1e-8)


def test_gmm_anisotropic():
    rng = np.random.default_rng(4)
    A = np.array([[3.0, 0.0], [0.0, 0.3]])
    X = np.vstack([rng.normal(size=(200, 2)) @ A, rng.normal(size=(200, 2)) @ A + [0.0, 1.6]])
    y = np.repeat([0, 1], 200)
    cfg = AlgorithmConfig("GMM", {"covariance_type": "full", "init_params": "kmeans"}, K=2)
    assert clustering_accuracy(y, fit_predict(cfg, X, seed=0)) >= 0.9


def test_kernel_linear_matches_kmeans():
    for seed in range(3):
        X, _ = blobs(n=40, K=3, sigma=4.0, seed=seed)
        seeds = np.random.default_rng(seed).choice(40, 3, replace=False)
        a = lloyd(X, X[seeds]).labels
        b = kernel_lloyd(X @ X.T, seeds).labels
        assert np.array_equal(a, b)


def test_single_linkage_matches_mst():
    rng = np.random.default_rng(5)
    for _ in range(10):
        X = rng.normal(size=(12, 2))
        for K in (2, 3, 4):
            assert same_partition(agglomerative(X, K, "euclidean", "single"), mst_cut(X, K))


def test_affinities_symmetric_nonnegative():
    X, _ = blobs(n=60, K=3, seed=6)
    for A in (knn_affinity(X, 5).toarray(), rbf_affinity(X, 0.1)):
        assert np.allclose(A, A.T) and np.all(A >= 0)
    A = knn_affinity(X, 5).toarray()
    # union symmetrization keeps every point's own k neighbours
    assert np.all(A.sum(axis=1) >= 5)


def test_spectral_rings_vs_kmeans():
    X, y = rings(400, seed=0)
    sp = AlgorithmConfig("SpeClu", {"affinity": "knn", "k": 10}, K=2)
    km = AlgorithmConfig("KMeans", {"init": "kmeans++", "metric": "euclidean", "n_init": 10,
                                    "max_iter": 500}, K=2)
    for s in range(5):
        assert clustering_accuracy(y, fit_predict(sp, X, seed=s)) == 1.0
        assert clustering_accuracy(y, fit_predict(km, X, seed=s)) <= 0.75


def test_kpc_assignment_never_increases_residual():
    X, y = subspaces(n_per=30, K=3, m=6, d=2, seed=1)
    res = kpc(X, 3, 2, seed=0)
    h = np.asarray(res.history)
    assert np.all(h[1::2] <= h[0::2] + 1e-9)


def test_ssc_zero_diagonal_and_recovery():
    X, y = subspaces(n_per=25, K=3, m=12, d=2, seed=2)
    C = self_representation(X, 100.0)
    assert np.max(np.abs(np.diag(C))) < 1e-8
    assert clustering_accuracy(y, ssc(X, 3, 100.0, seed=0)) == 1.0


def test_ssc_fails_on_single_feature():
    cfg = AlgorithmConfig("SSC", {"lambda": 100}, K=2)
    with pytest.raises(ClusteringError):
        fit_predict(cfg, np.arange(10.0)[:, None])


def test_birch_tree_and_labels():
    X, y = blobs(n=120, K=3, seed=7)
    tree = CFTree(threshold=0.5, branching_factor=10)
    for x in X:
        tree.insert(x)
    leaves = tree.leaf_entries()
    assert sum(e.n for e in leaves) == 120
    assert clustering_accuracy(y, birch(X, 3, 0.5, 10)) == 1.0


def test_mean_shift_finds_modes():
    X, y = blobs(n=150, K=3, seed=8)
    labels = mean_shift(X, bandwidth=3.0)
    assert clustering_accuracy(y, labels) == 1.0


def test_kmeans_cosine_rejects_zero_row():
    with pytest.raises(ClusteringError):
        kmeans(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), 2, metric="cosine")
