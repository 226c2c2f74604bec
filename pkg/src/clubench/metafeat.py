"""Dataset meta-features: statistical descriptors plus a KMeans landmarker block.

Coordinate order is frozen by the manifest.  Any descriptor that is
undefined for a dataset (constant column, a single feature, too few samples)
is imputed as 0 and its name is listed in ``MetaVector.imputed``.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .cluster.kmeans import kmeans
from .data import Dataset
from .metrics import InternalMetrics, MetricError, internal_metrics

DEFAULT_K_SET = (2, 4, 6, 8, 10, 12, 14, 16, 18, 20)
ENTROPY_BINS = 32
MAX_CORR_FEATURES = 1000
NORMALITY_ALPHA = 0.05
SIX_AGGS = ("min", "max", "mean", "std", "skewness", "kurtosis")
ENTROPY_AGGS = ("min", "max", "std", "mean")


@dataclass
class MetaVector:
    values: np.ndarray
    manifest: list  # [(name, formula_tag)]
    imputed: list = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (len(self.manifest),):
            raise ValueError("meta-vector length does not match its manifest")

    @property
    def names(self) -> list[str]:
        return [name for name, _ in self.manifest]

    def concat(self, other: "MetaVector") -> "MetaVector":
        return MetaVector(np.concatenate([self.values, other.values]),
                          self.manifest + other.manifest, self.imputed + other.imputed)


class _Builder:
    def __init__(self):
        self.values: list[float] = []
        self.manifest: list = []
        self.imputed: list = []

    def add(self, name: str, tag: str, value) -> None:
        v = float(value) if value is not None else float("nan")
        if not np.isfinite(v):
            self.imputed.append(name)
            v = 0.0
        self.values.append(v)
        self.manifest.append((name, tag))

    def add_aggregates(self, name: str, tag: str, sample: np.ndarray, aggs=SIX_AGGS) -> None:
        sample = np.asarray(sample, dtype=np.float64)
        sample = sample[np.isfinite(sample)]
        for agg in aggs:
            self.add(f"{name}_{agg}", f"{agg} of {tag}", _aggregate(sample, agg))

    def build(self) -> MetaVector:
        return MetaVector(np.array(self.values), self.manifest, self.imputed)


def _aggregate(sample: np.ndarray, agg: str):
    if sample.size == 0:
        return None
    if agg == "min":
        return sample.min()
    if agg == "max":
        return sample.max()
    if agg == "mean":
        return sample.mean()
    if agg == "std":
        return sample.std()
    if sample.size < 3 or np.ptp(sample) == 0:
        return None
    if agg == "skewness":
        return stats.skew(sample)
    if agg == "kurtosis":
        return stats.kurtosis(sample, fisher=False)
    raise ValueError(agg)


def _feature_mean(per_feature: np.ndarray):
    """Average a per-feature descriptor over the features where it is defined."""
    ok = np.isfinite(per_feature)
    return per_feature[ok].mean() if ok.any() else None


def _safe_div(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    out = np.full(np.broadcast(a, b).shape, np.nan)
    np.divide(a, b, out=out, where=np.abs(b) > 1e-12)
    return out


def _gini(col: np.ndarray) -> float:
    x = np.sort(col - col.min())
    total = x.sum()
    if total <= 0:
        return np.nan
    n = x.size
    return float((2.0 * np.arange(1, n + 1) @ x) / (n * total) - (n + 1) / n)


def _entropy_ratio(col: np.ndarray) -> float:
    n = col.size
    if n < 2:
        return np.nan
    counts, _ = np.histogram(col, bins=ENTROPY_BINS)
    p = counts[counts > 0] / n
    return float(-(p * np.log2(p)).sum() / np.log2(n))


def _normal_rejections(X: np.ndarray) -> Optional[float]:
    # the omnibus test's skewness component needs n >= 8
    if X.shape[0] < 8:
        return None
    flags = []
    for col in X.T:
        if np.ptp(col) == 0:
            continue
        p = stats.normaltest(col).pvalue
        if np.isfinite(p):
            flags.append(p < NORMALITY_ALPHA)
    return float(np.mean(flags)) if flags else None


def _anova_pvalues(X: np.ndarray, groups: Optional[np.ndarray]) -> np.ndarray:
    if groups is None or np.unique(groups).size < 2:
        return np.array([])
    out = []
    ids = np.unique(groups)
    for col in X.T:
        parts = [col[groups == g] for g in ids]
        if np.ptp(col) == 0 or any(p.size < 2 for p in parts):
            continue
        if all(np.ptp(p) == 0 for p in parts):
            continue
        out.append(stats.f_oneway(*parts).pvalue)
    return np.asarray(out, dtype=np.float64)


def _offdiag(M: np.ndarray) -> np.ndarray:
    iu = np.triu_indices(M.shape[0], k=1)
    return M[iu]


def _sorted_rows(X: np.ndarray) -> np.ndarray:
    """Rows in lexicographic order, so landmark runs do not depend on row order."""
    return X[np.lexsort(X.T[::-1])]


def landmark_labels(X: np.ndarray, K: int, seed: int) -> np.ndarray:
    Xs = _sorted_rows(X)
    return kmeans(Xs, K, init="kmeans++", metric="euclidean", n_init=10, seed=seed).labels


def statistical_features(d: Dataset, seed: int = 0,
                         anova_groups: Optional[np.ndarray] = None) -> MetaVector:
    """Statistical descriptors of the feature matrix.

    ``anova_groups`` are group labels aligned with the lexicographically
    sorted rows (as produced by the K=2 landmark run); they are computed here
    when not supplied.
    """
    X = d.X
    n, p = X.shape
    b = _Builder()
    with np.errstate(all="ignore"), warnings.catch_warnings():
        warnings.simplefilter("ignore")

        b.add("n", "number of instances", n)
        b.add("p", "number of features", p)
        b.add("p_over_n", "p/n", p / n)
        b.add("log_n", "log(n)", np.log(n))
        b.add("log_p", "log(p)", np.log(p))
        b.add("log_n_over_p", "log(n/p)", np.log(n / p))
        uniques = np.array([np.unique(col).size for col in X.T])
        b.add("pct_categorical", "share of features with <= 10 distinct values",
              np.mean(uniques <= 10))

        mean = X.mean(axis=0)
        median = np.median(X, axis=0)
        var = X.var(axis=0)
        std = np.sqrt(var)
        mn = X.min(axis=0)
        mx = X.max(axis=0)
        q1, q25, q75, q99 = np.percentile(X, [1, 25, 75, 99], axis=0)
        b.add("mean", "feature mean, averaged", _feature_mean(mean))
        b.add("median", "feature median, averaged", _feature_mean(median))
        b.add("var", "feature variance, averaged", _feature_mean(var))
        b.add("min", "feature minimum, averaged", _feature_mean(mn))
        b.add("max", "feature maximum, averaged", _feature_mean(mx))
        b.add("std", "feature std, averaged", _feature_mean(std))
        b.add("q1", "1st percentile, averaged", _feature_mean(q1))
        b.add("q25", "25th percentile, averaged", _feature_mean(q25))
        b.add("q75", "75th percentile, averaged", _feature_mean(q75))
        b.add("q99", "99th percentile, averaged", _feature_mean(q99))
        b.add("iqr", "q75 - q25, averaged", _feature_mean(q75 - q25))
        b.add("normalized_mean", "mean / max, averaged", _feature_mean(_safe_div(mean, mx)))
        b.add("normalized_median", "median / max, averaged", _feature_mean(_safe_div(median, mx)))
        b.add("range", "max - min, averaged", _feature_mean(mx - mn))
        b.add("gini", "Gini of x - min(x), averaged",
              _feature_mean(np.array([_gini(c) for c in X.T])))
        b.add("mad", "median |x - median|, averaged",
              _feature_mean(np.median(np.abs(X - median), axis=0)))
        b.add("aad", "mean |x - median|, averaged",
              _feature_mean(np.mean(np.abs(X - median), axis=0)))
        b.add("quantile_dispersion", "(q75 - q25) / (q75 + q25), averaged",
              _feature_mean(_safe_div(q75 - q25, q75 + q25)))
        b.add("coef_variance", "variance / mean, averaged", _feature_mean(_safe_div(var, mean)))
        b.add("outlier_1_99", "share outside [q1, q99], averaged",
              _feature_mean(np.mean((X < q1) | (X > q99), axis=0)))
        b.add("outlier_3std", "share with |x - mean| > 3 std, averaged",
              _feature_mean(np.mean(np.abs(X - mean) > 3 * std, axis=0)))
        b.add("normality_rejected", "share of features failing the K^2 normality test",
              _normal_rejections(X))
        centred = X - mean
        for k in range(5, 11):
            b.add(f"moment_{k}", f"{k}th central moment, averaged",
                  _feature_mean(np.mean(centred ** k, axis=0)))

        varying = std > 1e-12
        skew = np.full(p, np.nan)
        kurt = np.full(p, np.nan)
        if varying.any():
            skew[varying] = stats.skew(X[:, varying], axis=0)
            kurt[varying] = stats.kurtosis(X[:, varying], axis=0, fisher=False)
        b.add_aggregates("skewness", "feature skewness", skew)
        b.add_aggregates("kurtosis", "feature kurtosis mu4/sigma^4", kurt)

        cols = np.arange(p)
        if p > MAX_CORR_FEATURES:
            cols = np.sort(np.random.default_rng(seed).choice(p, MAX_CORR_FEATURES, replace=False))
        Xc = X[:, cols]
        if Xc.shape[1] >= 2 and n >= 2:
            cov = np.cov(Xc, rowvar=False, bias=True)
            sd = np.sqrt(np.diag(cov))
            corr = cov / np.outer(sd, sd)
            ok = sd > 1e-12
            corr_vals = _offdiag(corr[np.ix_(ok, ok)]) if ok.sum() >= 2 else np.array([])
            cov_vals = _offdiag(cov)
        else:
            corr_vals = cov_vals = np.array([])
        b.add_aggregates("correlation", "off-diagonal feature correlation", corr_vals)
        b.add_aggregates("covariance", "off-diagonal feature covariance", cov_vals)
        b.add_aggregates("sparsity", "distinct values / n per feature", uniques / n)

        if anova_groups is None and n >= 3:
            anova_groups = landmark_labels(X, 2, seed)
        Xs = _sorted_rows(X)
        b.add_aggregates("anova_p", "one-way ANOVA p-value per feature (K=2 landmark groups)",
                         _anova_pvalues(Xs, anova_groups))

        b.add("coef_variation", "std / |mean|, averaged",
              _feature_mean(_safe_div(std, np.abs(mean))))
        ent = np.array([_entropy_ratio(c) for c in X.T])
        b.add_aggregates("norm_entropy", "H(X)/log2(n) on 32-bin histograms", ent, aggs=ENTROPY_AGGS)
    return b.build()


def landmarker_features(d: Dataset, K_set: Sequence[int] = DEFAULT_K_SET, seed: int = 0,
                        _labels_out: Optional[dict] = None) -> MetaVector:
    """Internal validity metrics of KMeans(kmeans++, n_init=10) for every K in ``K_set``.

    Laid out K-major, metric-minor.  K values with ``K > n - 1`` are skipped
    (zeros, flagged imputed).
    """
    X = _sorted_rows(d.X)
    n = X.shape[0]
    b = _Builder()
    metric_names = InternalMetrics.names()
    with np.errstate(all="ignore"), warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for K in K_set:
            values = None
            if K <= n - 1:
                labels = kmeans(X, K, init="kmeans++", metric="euclidean", n_init=10,
                                seed=seed).labels
                if _labels_out is not None:
                    _labels_out[K] = labels
                try:
                    values = internal_metrics(X, labels).as_array()
                except MetricError:
                    values = None
            for j, name in enumerate(metric_names):
                b.add(f"kmeans_k{K}_{name}", f"KMeans landmark K={K}: {name}",
                      None if values is None else values[j])
    return b.build()


def meta_vector(d: Dataset, seed: int = 0, K_set: Sequence[int] = DEFAULT_K_SET) -> MetaVector:
    """Statistical block followed by the landmarker block."""
    labels: dict = {}
    landmark = landmarker_features(d, K_set, seed, _labels_out=labels)
    groups = labels.get(2)
    stat = statistical_features(d, seed, anova_groups=groups)
    return stat.concat(landmark)


def write_meta(vectors: Sequence[MetaVector], names: Sequence[str], csv_path, manifest_path) -> None:
    """One CSV row per dataset keyed by the manifest, plus the manifest as JSON."""
    if not vectors:
        raise ValueError("no meta-vectors to write")
    header = vectors[0].names
    for v in vectors[1:]:
        if v.names != header:
            raise ValueError("meta-vectors disagree on their manifest")
    with Path(csv_path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["dataset"] + header)
        for name, v in zip(names, vectors):
            w.writerow([name] + [repr(float(x)) for x in v.values])
    doc = {
        "dimension": len(header),
        "features": [{"name": n, "formula": t} for n, t in vectors[0].manifest],
        "imputed": {name: v.imputed for name, v in zip(names, vectors)},
    }
    Path(manifest_path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def read_meta(csv_path):
    """Return (dataset names, feature names, Z matrix)."""
    csv_path = Path(csv_path)
    if not csv_path.is_file():
        raise FileNotFoundError(f"no such meta-feature file: {csv_path}")
    with csv_path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    header = rows[0][1:]
    names = [r[0] for r in rows[1:]]
    Z = np.array([[float(v) for v in r[1:]] for r in rows[1:]], dtype=np.float64)
    return names, header, Z.reshape(len(names), len(header))
