import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clubench.data import (DataError, Dataset, dim_group, group_assign, imbalance_stats, ir_group,
                           load_csv, load_dir, preprocess, relabel, save_csv, standardize,
                           subsample_indices)


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_load_csv_relabels_by_first_occurrence(tmp_path):
    p = _write(tmp_path / "d.csv", "a,b,label\n1,2,b\n3,4,b\n5,6,a\n7,8,a\n")
    d = load_csv(p)
    assert (d.n, d.m, d.K) == (4, 2, 2)
    assert d.y.tolist() == [0, 0, 1, 1]


def test_load_csv_string_labels(tmp_path):
    p = _write(tmp_path / "d.csv", "x,label\n1,a\n2,a\n3,b\n4,b\n")
    d = load_csv(p)
    assert d.y.tolist() == [0, 0, 1, 1] and d.K == 2


def test_load_csv_nan_feature(tmp_path):
    p = _write(tmp_path / "d.csv", "x,label\n1,a\nnan,a\n3,b\n")
    with pytest.raises(DataError, match="non-numeric feature"):
        load_csv(p)


def test_load_csv_text_feature(tmp_path):
    p = _write(tmp_path / "d.csv", "x,label\n1,a\nfoo,a\n3,b\n")
    with pytest.raises(DataError, match="non-numeric feature"):
        load_csv(p)


def test_load_csv_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_csv(tmp_path / "missing.csv")
    with pytest.raises(DataError):
        load_csv(_write(tmp_path / "e.csv", "x,label\n"))
    with pytest.raises(DataError, match="single distinct"):
        load_csv(_write(tmp_path / "one.csv", "x,label\n1,a\n2,a\n"))
    with pytest.raises(DataError, match="not found"):
        load_csv(_write(tmp_path / "c.csv", "x,y\n1,2\n3,4\n"), label_column="cls")


def test_unlabeled_with_sidecar(tmp_path):
    p = _write(tmp_path / "u.csv", "x,z\n1,2\n3,4\n5,6\n")
    _write(tmp_path / "u.json", json.dumps({"name": "unl", "modality": "text", "K": 2}))
    d = load_csv(p)
    assert d.y is None and d.K == 2 and d.name == "unl" and d.modality == "text"


def test_iris_style_shape(tmp_path):
    rng = np.random.default_rng(0)
    X = rng.normal(size=(150, 4))
    y = np.repeat([0, 1, 2], 50)
    save_csv(Dataset("iris", X, y), tmp_path / "iris.csv")
    d = load_csv(tmp_path / "iris.csv")
    assert (d.n, d.m, d.K) == (150, 4, 3)
    assert imbalance_stats(d.y).r_mm == pytest.approx(1.0, abs=5e-4)
    np.testing.assert_array_equal(d.X, X)


def test_load_dir_sorted(tmp_path):
    for name in ("b", "a"):
        save_csv(Dataset(name, np.arange(8.0).reshape(4, 2), np.array([0, 0, 1, 1])), tmp_path / f"{name}.csv")
    assert [d.name for d in load_dir(tmp_path)] == ["a", "b"]


def test_dataset_invariants():
    with pytest.raises(DataError):
        Dataset("x", np.zeros((1, 2)))
    with pytest.raises(DataError):
        Dataset("x", np.array([[np.nan], [1.0]]))
    with pytest.raises(DataError):
        Dataset("x", np.zeros((3, 1)), np.array([0, 2, 2]))  # not contiguous
    with pytest.raises(DataError):
        Dataset("x", np.zeros((2, 1)), np.array([0, 1]))  # K must be < n
    d = Dataset("x", np.zeros((3, 1)), np.array([0, 1, 1]))
    with pytest.raises(ValueError):
        d.X[0, 0] = 1.0


def test_preprocess_subsample_and_standardize():
    rng = np.random.default_rng(1)
    X = rng.normal(3.0, 2.0, size=(12000, 3))
    X[:, 2] = 5.0
    y = rng.integers(0, 3, 12000)
    d = preprocess(Dataset("big", X, y), standardize=True, cap=10000, seed=7)
    assert d.n == 10000
    np.testing.assert_allclose(d.X[:, :2].mean(axis=0), 0, atol=1e-12)
    np.testing.assert_allclose(d.X[:, :2].std(axis=0), 1, atol=1e-12)
    assert np.all(d.X[:, 2] == 0)
    d2 = preprocess(Dataset("big", X, y), standardize=True, cap=10000, seed=7)
    np.testing.assert_array_equal(d.X, d2.X)
    with pytest.raises(ValueError):
        preprocess(d, cap=1)


def test_preprocess_keeps_labels_aligned():
    X = np.arange(40.0).reshape(20, 2)
    y = (np.arange(20) >= 10).astype(int)
    d = preprocess(Dataset("s", X, y), standardize=False, cap=8, seed=3)
    assert d.n == 8
    rows = (d.X[:, 0] / 2).astype(int)
    # relabeled contiguously but consistent with the source labels
    assert len(set(zip(y[rows].tolist(), d.y.tolist()))) == d.K


def test_standardize_idempotent():
    X = standardize(np.random.default_rng(2).normal(size=(50, 4)))
    np.testing.assert_allclose(standardize(X), X, atol=1e-12)


def test_subsample_deterministic():
    a = subsample_indices(100, 10, 5)
    assert np.array_equal(a, subsample_indices(100, 10, 5))
    assert len(set(a.tolist())) == 10


@pytest.mark.parametrize("counts,expected", [
    ([50, 50], (1.0, 0.5, 0.0)),
    ([17, 44], (0.386, 0.279, None)),
    ([1, 3], (1 / 3, 0.25, 0.25)),
])
def test_imbalance_examples(counts, expected):
    y = np.repeat(np.arange(len(counts)), counts)
    s = imbalance_stats(y)
    assert s.r_mm == pytest.approx(expected[0], abs=5e-4)
    assert s.r_ma == pytest.approx(expected[1], abs=5e-4)
    if expected[2] is not None:
        assert s.IR == pytest.approx(expected[2], abs=1e-12)


def test_imbalance_single_class():
    with pytest.raises(DataError):
        imbalance_stats([0, 0, 0])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 4), min_size=4, max_size=40))
def test_imbalance_properties(labels):
    y = np.asarray(labels)
    if np.unique(y).size < 2:
        return
    s = imbalance_stats(y)
    K = np.unique(y).size
    assert s.r_ma <= s.r_mm + 1e-12 and s.r_ma <= 1 / K + 1e-12
    perm = np.random.default_rng(0).permutation(y.size)
    s2 = imbalance_stats(relabel(y[perm][::-1]))
    assert s2.IR == pytest.approx(s.IR, abs=1e-12)


def test_group_boundaries():
    assert (dim_group(100), dim_group(101), dim_group(500), dim_group(501)) == ("low", "mid", "mid", "high")
    assert (ir_group(0.099), ir_group(0.1), ir_group(0.3), ir_group(0.31)) == ("low", "mid", "mid", "high")


@pytest.mark.parametrize("m,ir,expected", [(100, 0.05, ("low", "low")), (784, 0.001, ("high", "low")),
                                           (300, 0.35, ("mid", "high"))])
def test_group_assign_examples(m, ir, expected):
    d = Dataset("g", np.zeros((4, m)), np.array([0, 0, 1, 1]))
    s = imbalance_stats(d.y)
    s = type(s)(s.r_mm, s.r_ma, ir)
    tag = group_assign(d, s)
    assert (tag.dim_group, tag.ir_group) == expected
