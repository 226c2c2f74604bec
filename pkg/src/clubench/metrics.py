"""External (ACC, NMI, ARI) and internal cluster-validity metrics.

External metrics compare a predicted partition with ground truth and are the
benchmark's performance scores.  Internal metrics only feed the KMeans
landmarker meta-features.
"""

from __future__ import annotations

from dataclasses import astuple, dataclass, fields

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class Contingency:
    table: np.ndarray
    n: int


def _check_pair(y_true, y_pred, min_len=1):
    a = np.asarray(y_true)
    b = np.asarray(y_pred)
    if a.ndim != 1 or b.ndim != 1 or a.shape != b.shape:
        raise MetricError(f"label vectors must have equal length, got {a.shape} and {b.shape}")
    if a.size < min_len:
        raise MetricError("empty label vector")
    return a, b


def contingency(y_true, y_pred) -> Contingency:
    a, b = _check_pair(y_true, y_pred)
    ua, ia = np.unique(a, return_inverse=True)
    ub, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ua.size, ub.size), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)
    return Contingency(table=table, n=int(a.size))


def clustering_accuracy(y_true, y_pred) -> float:
    """Best matched fraction over injective cluster-to-class maps (Hungarian)."""
    c = contingency(y_true, y_pred)
    t = c.table
    size = max(t.shape)
    padded = np.zeros((size, size), dtype=np.int64)
    padded[: t.shape[0], : t.shape[1]] = t
    rows, cols = linear_sum_assignment(padded, maximize=True)
    return float(padded[rows, cols].sum() / c.n)


def _entropy(counts: np.ndarray, n: int) -> float:
    p = counts[counts > 0] / n
    return float(-(p * np.log(p)).sum())


def nmi(y_true, y_pred) -> float:
    """Mutual information normalised by the arithmetic mean of the entropies."""
    c = contingency(y_true, y_pred)
    t, n = c.table, c.n
    h_u = _entropy(t.sum(axis=1), n)
    h_v = _entropy(t.sum(axis=0), n)
    if t.shape[0] == 1 or t.shape[1] == 1:
        return 0.0
    nz = t > 0
    pij = t[nz] / n
    outer = np.outer(t.sum(axis=1), t.sum(axis=0))[nz] / (n * n)
    mi = float((pij * (np.log(pij) - np.log(outer))).sum())
    denom = 0.5 * (h_u + h_v)
    return float(min(max(mi / denom, 0.0), 1.0))


def _comb2(x):
    x = np.asarray(x, dtype=np.float64)
    return x * (x - 1) / 2.0


def ari(y_true, y_pred) -> float:
    c = contingency(y_true, y_pred)
    t, n = c.table, c.n
    sum_ij = _comb2(t).sum()
    sum_a = _comb2(t.sum(axis=1)).sum()
    sum_b = _comb2(t.sum(axis=0)).sum()
    total = _comb2(n)
    expected = sum_a * sum_b / total if total > 0 else 0.0
    max_index = 0.5 * (sum_a + sum_b)
    denom = max_index - expected
    if denom == 0:
        # both partitions trivial (all-in-one or all-singletons) and identical in kind
        return 1.0
    return float((sum_ij - expected) / denom)


def external_scores(y_true, y_pred) -> dict:
    return {
        "acc": clustering_accuracy(y_true, y_pred),
        "nmi": nmi(y_true, y_pred),
        "ari": ari(y_true, y_pred),
    }


@dataclass(frozen=True)
class InternalMetrics:
    sc_mean: float
    sc_std: float
    sc_min: float
    sc_max: float
    chi: float
    dbi: float
    sse_total: float
    sse_mean: float
    sse_std: float
    sse_max: float
    sse_min: float
    sse_explained_ratio: float
    sse_unexplained_ratio: float

    @classmethod
    def names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=np.float64)


_BLOCK = 2048


def silhouette_samples(X: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Per-sample Euclidean silhouette; members of singleton clusters score 0."""
    ids, inv = np.unique(labels, return_inverse=True)
    k = ids.size
    onehot = np.zeros((X.shape[0], k))
    onehot[np.arange(X.shape[0]), inv] = 1.0
    sizes = onehot.sum(axis=0)
    sums = np.empty((X.shape[0], k))  # distance sum from each sample to every cluster
    for lo in range(0, X.shape[0], _BLOCK):
        sums[lo:lo + _BLOCK] = cdist(X[lo:lo + _BLOCK], X) @ onehot
    own = sizes[inv]
    with np.errstate(invalid="ignore", divide="ignore"):
        a = sums[np.arange(X.shape[0]), inv] / (own - 1)
        mean_other = sums / sizes
    mean_other[np.arange(X.shape[0]), inv] = np.inf
    b = mean_other.min(axis=1)
    denom = np.maximum(a, b)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = (b - a) / denom
    s[(own == 1) | (denom == 0) | ~np.isfinite(s)] = 0.0
    return s


def internal_metrics(X, labels) -> InternalMetrics:
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels)
    n = X.shape[0]
    if labels.shape != (n,):
        raise MetricError("labels must match the rows of X")
    if n < 3:
        raise MetricError("internal metrics need at least 3 samples")
    ids, inv = np.unique(labels, return_inverse=True)
    k = ids.size
    if k < 2:
        raise MetricError("internal metrics need at least 2 clusters")
    sizes = np.bincount(inv, minlength=k)
    if np.all(sizes == 1):
        raise MetricError("silhouette is undefined when every cluster is a singleton")

    s = silhouette_samples(X, inv)

    centers = np.vstack([X[inv == c].mean(axis=0) for c in range(k)])
    grand = X.mean(axis=0)
    resid = X - centers[inv]
    sq = (resid ** 2).sum(axis=1)
    sse = np.bincount(inv, weights=sq, minlength=k)
    sse_total = float(sse.sum())
    tss = float(((X - grand) ** 2).sum())
    between = float((sizes * ((centers - grand) ** 2).sum(axis=1)).sum())

    if n == k:
        chi = 0.0
    elif sse_total == 0.0:
        chi = 1.0
    else:
        chi = (between / (k - 1)) / (sse_total / (n - k))

    # Davies-Bouldin with mean Euclidean distance to centroid as scatter
    scatter = np.bincount(inv, weights=np.sqrt(sq), minlength=k) / sizes
    cd = cdist(centers, centers)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = (scatter[:, None] + scatter[None, :]) / cd
    ratio[~np.isfinite(ratio)] = 0.0
    np.fill_diagonal(ratio, 0.0)
    dbi = float(ratio.max(axis=1).mean())

    if tss > 0:
        explained = min(max(1.0 - sse_total / tss, 0.0), 1.0)
    else:
        explained = 0.0
    return InternalMetrics(
        sc_mean=float(s.mean()),
        sc_std=float(s.std()),
        sc_min=float(s.min()),
        sc_max=float(s.max()),
        chi=float(chi),
        dbi=dbi,
        sse_total=sse_total,
        sse_mean=float(sse.mean()),
        sse_std=float(sse.std()),
        sse_max=float(sse.max()),
        sse_min=float(sse.min()),
        sse_explained_ratio=explained,
        sse_unexplained_ratio=1.0 - explained,
    )
