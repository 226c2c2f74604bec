import numpy as np
import pytest

from clubench.data import Dataset, preprocess
from clubench.metafeat import (DEFAULT_K_SET, landmarker_features, meta_vector, read_meta,
                               statistical_features, write_meta)
from synth import blobs


def _ds(X, name="d", K=2):
    return Dataset(name, np.asarray(X, dtype=float), K=K)


def _vals(mv):
    return dict(zip(mv.names, mv.values))


def test_structure_and_determinism():
    X, y = blobs(n=120, K=3, m=4, seed=0)
    d = Dataset("b", X, y)
    mv = meta_vector(d, seed=1)
    assert len(mv.values) == len(mv.manifest) == len(set(mv.names))
    land = landmarker_features(d, seed=1)
    assert len(land.values) == 130 == 13 * len(DEFAULT_K_SET)
    assert mv.names[-130:] == land.names
    assert land.names[0] == "kmeans_k2_sc_mean" and land.names[-1] == "kmeans_k20_sse_unexplained_ratio"
    again = meta_vector(d, seed=1)
    assert np.array_equal(mv.values, again.values) and mv.names == again.names


def test_standardized_identities():
    X = np.random.default_rng(1).normal(3, 2, size=(200, 5))
    d = preprocess(_ds(X), standardize=True)
    v = _vals(statistical_features(d))
    assert abs(v["mean"]) < 1e-9
    assert v["std"] == pytest.approx(1.0, abs=1e-9)


def test_identical_features_correlation():
    X = np.random.default_rng(2).normal(size=(50, 3))
    X[:, 2] = X[:, 0]
    v = _vals(statistical_features(_ds(X)))
    assert v["correlation_max"] == pytest.approx(1.0, abs=1e-12)


def test_single_feature_correlation_imputed():
    mv = statistical_features(_ds(np.random.default_rng(3).normal(size=(30, 1))))
    v = _vals(mv)
    assert v["correlation_max"] == 0.0 and "correlation_max" in mv.imputed


def test_landmark_explained_ratio_on_tight_blobs():
    centers = np.array([[0, 0], [100, 0], [0, 100], [100, 100]], dtype=float)
    X = np.repeat(centers, 10, axis=0) + np.random.default_rng(4).normal(0, 1e-3, (40, 2))
    v = _vals(landmarker_features(_ds(X, K=4), K_set=(4,)))
    assert v["kmeans_k4_sse_explained_ratio"] > 0.99


def test_landmark_sse_non_increasing_in_k():
    X, y = blobs(n=200, K=5, sigma=2.0, seed=5)
    v = _vals(landmarker_features(Dataset("b", X, y), seed=0))
    sse = [v[f"kmeans_k{K}_sse_total"] for K in DEFAULT_K_SET]
    assert np.all(np.diff(sse) <= 1e-9 * sse[0])


def test_row_permutation_invariance():
    X, y = blobs(n=90, K=3, m=3, sigma=1.5, seed=6)
    perm = np.random.default_rng(0).permutation(90)
    a = meta_vector(Dataset("a", X, y), seed=2)
    b = meta_vector(Dataset("a", X[perm], y[perm]), seed=2)
    n_stat = len(a.values) - 130
    np.testing.assert_allclose(a.values[:n_stat], b.values[:n_stat], rtol=1e-9, atol=1e-9)
    np.testing.assert_allclose(a.values[n_stat:], b.values[n_stat:], rtol=1e-9, atol=1e-9)


def test_small_n_skips_large_k():
    mv = landmarker_features(_ds(np.random.default_rng(7).normal(size=(6, 2))))
    v = _vals(mv)
    assert v["kmeans_k8_sc_mean"] == 0.0 and "kmeans_k8_sc_mean" in mv.imputed
    assert "kmeans_k4_sc_mean" not in mv.imputed


def test_degenerate_fuzz_no_nan():
    rng = np.random.default_rng(8)
    cases = [np.ones((5, 3)), np.array([[1.0, 2.0], [1.0, 2.0], [3.0, 4.0]]),
             np.zeros((4, 1)) + [[0.0], [0.0], [0.0], [1.0]], rng.normal(size=(3, 7))]
    for X in cases:
        mv = meta_vector(_ds(X))
        assert np.all(np.isfinite(mv.values))


def test_meta_io(tmp_path):
    X, y = blobs(n=60, K=3, seed=9)
    vs = [meta_vector(Dataset(f"d{i}", X + i, y)) for i in range(2)]
    write_meta(vs, ["d0", "d1"], tmp_path / "m.csv", tmp_path / "m.json")
    names, header, Z = read_meta(tmp_path / "m.csv")
    assert names == ["d0", "d1"] and header == vs[0].names
    np.testing.assert_array_equal(Z[1], vs[1].values)
    assert '"dimension"' in (tmp_path / "m.json").read_text()
