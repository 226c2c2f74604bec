"""Performance-driven configuration selection from meta-features.

A bagged forest of multi-output regression trees maps a dataset's
meta-feature vector to its predicted performance over every configuration;
the configuration with the highest prediction is selected.  Unobserved
targets are excluded from split scoring and leaf means.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .cluster import algorithm_of

logger = logging.getLogger(__name__)

MAX_DEPTH = 12
MIN_LEAF = 2


class SelectionError(ValueError):
    pass


@dataclass
class Tree:
    feature: list
    threshold: list
    left: list
    right: list
    value: list  # leaf vectors (None for internal nodes)

    def leaf_vector(self, z: np.ndarray) -> np.ndarray:
        node = 0
        while self.feature[node] >= 0:
            node = self.left[node] if z[self.feature[node]] <= self.threshold[node] else self.right[node]
        return np.asarray(self.value[node])

    def to_dict(self) -> dict:
        return {"feature": self.feature, "threshold": self.threshold, "left": self.left,
                "right": self.right, "value": self.value}


def _masked_stats(Y, M):
    cnt = M.sum(axis=0)
    s1 = (Y * M).sum(axis=0)
    s2 = (Y * Y * M).sum(axis=0)
    return cnt, s1, s2


def _sse(cnt, s1, s2):
    with np.errstate(invalid="ignore", divide="ignore"):
        v = np.where(cnt > 0, s2 - s1 * s1 / np.where(cnt > 0, cnt, 1.0), 0.0)
    return np.maximum(v, 0.0).sum(axis=-1)


class _TreeBuilder:
    def __init__(self, Z, Y, M, fallback, rng, max_depth, min_leaf, mtry):
        self.Z, self.Y, self.M = Z, Y, M
        self.fallback = fallback
        self.rng = rng
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.mtry = mtry
        self.tree = Tree([], [], [], [], [])

    def _new_node(self):
        t = self.tree
        for lst, v in ((t.feature, -1), (t.threshold, 0.0), (t.left, -1), (t.right, -1), (t.value, None)):
            lst.append(v)
        return len(t.feature) - 1

    def _leaf_value(self, idx):
        cnt, s1, _ = _masked_stats(self.Y[idx], self.M[idx])
        with np.errstate(invalid="ignore", divide="ignore"):
            mean = np.where(cnt > 0, s1 / np.where(cnt > 0, cnt, 1.0), self.fallback)
        return [float(v) for v in mean]

    def _best_split(self, idx):
        Y, M = self.Y[idx], self.M[idx]
        n = idx.size
        cnt, s1, s2 = _masked_stats(Y, M)
        parent = _sse(cnt, s1, s2)
        if parent <= 0:
            return None
        best = (0.0, None, None)
        F = self.Z.shape[1]
        feats = self.rng.choice(F, size=min(self.mtry, F), replace=False)
        lo, hi = self.min_leaf - 1, n - self.min_leaf - 1
        if hi < lo:
            return None
        YM = Y * M
        YYM = YM * Y
        # all sampled features at once: axis 0 sorted samples, axis 1 feature
        z = self.Z[np.ix_(idx, feats)]
        order = np.argsort(z, axis=0, kind="stable")
        zs = np.take_along_axis(z, order, axis=0)
        sl = slice(lo, hi + 1)
        c_l = np.cumsum(M[order], axis=0)[sl]
        a_l = np.cumsum(YM[order], axis=0)[sl]
        b_l = np.cumsum(YYM[order], axis=0)[sl]
        valid = zs[lo:hi + 1] < zs[lo + 1:hi + 2]
        left = _sse(c_l, a_l, b_l)
        right = _sse(cnt - c_l, s1 - a_l, s2 - b_l)
        gain = np.where(valid, parent - (left + right), -np.inf)
        for j, f in enumerate(feats):
            if not valid[:, j].any():
                continue
            k = int(np.argmax(gain[:, j]))
            if gain[k, j] > best[0] + 1e-12 * parent:
                i = lo + k
                best = (float(gain[k, j]), int(f), float(0.5 * (zs[i, j] + zs[i + 1, j])))
        return None if best[1] is None else best

    def build(self, idx, depth=0):
        node = self._new_node()
        split = None
        if depth < self.max_depth and idx.size >= 2 * self.min_leaf:
            split = self._best_split(idx)
        if split is None:
            self.tree.value[node] = self._leaf_value(idx)
            return node
        _, f, thr = split
        go_left = self.Z[idx, f] <= thr
        self.tree.feature[node] = f
        self.tree.threshold[node] = thr
        left = self.build(idx[go_left], depth + 1)
        right = self.build(idx[~go_left], depth + 1)
        self.tree.left[node] = left
        self.tree.right[node] = right
        return node


@dataclass
class SelectorModel:
    trees: list
    feature_manifest: list
    target_manifest: list
    metric: str = "acc"
    seed: int = 0
    params: dict = field(default_factory=dict)
    oob: list = field(default_factory=list)

    def predict(self, Z) -> np.ndarray:
        Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
        if Z.shape[1] != len(self.feature_manifest):
            raise SelectionError(f"expected {len(self.feature_manifest)} meta-features, got {Z.shape[1]}")
        out = np.zeros((Z.shape[0], len(self.target_manifest)))
        for tree in self.trees:
            for i, z in enumerate(Z):
                out[i] += tree.leaf_vector(z)
        return out / len(self.trees)

    def to_json(self) -> str:
        doc = {
            "kind": "multi-output bagged regression forest",
            "metric": self.metric,
            "seed": self.seed,
            "params": self.params,
            "feature_manifest": self.feature_manifest,
            "target_manifest": self.target_manifest,
            "oob": self.oob,
            "trees": [t.to_dict() for t in self.trees],
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "SelectorModel":
        doc = json.loads(text)
        trees = [Tree(**t) for t in doc["trees"]]
        return cls(trees, doc["feature_manifest"], doc["target_manifest"], doc["metric"],
                   doc["seed"], doc["params"], doc.get("oob", []))


def fit(Z, P, trees: int = 200, seed: int = 0, feature_names: Optional[Sequence[str]] = None,
        target_names: Optional[Sequence[str]] = None, metric: str = "acc",
        max_depth: int = MAX_DEPTH, min_leaf: int = MIN_LEAF, mtry: Optional[int] = None) -> SelectorModel:
    """Bootstrap-bagged multi-output CART forest; NaN targets are unobserved."""
    Z = np.asarray(Z, dtype=np.float64)
    P = np.asarray(P, dtype=np.float64)
    if Z.ndim != 2 or P.ndim != 2 or Z.shape[0] != P.shape[0]:
        raise SelectionError("Z and P must be matrices with one row per dataset")
    t, F = Z.shape
    if t < 5:
        raise SelectionError(f"need at least 5 training datasets, got {t}")
    if F == 0:
        raise SelectionError("no meta-features")
    if not np.all(np.isfinite(Z)):
        raise SelectionError("meta-features must be finite")
    M = np.isfinite(P).astype(np.float64)
    Y = np.nan_to_num(P)
    cnt = M.sum(axis=0)
    fallback = np.where(cnt > 0, (Y * M).sum(axis=0) / np.maximum(cnt, 1.0), 0.0)
    mtry = mtry or int(math.ceil(math.sqrt(F)))
    children = np.random.SeedSequence(seed).spawn(trees)
    forest, oob = [], []
    for child in children:
        rng = np.random.default_rng(child)
        boot = rng.integers(0, t, size=t)
        builder = _TreeBuilder(Z, Y, M, fallback, rng, max_depth, min_leaf, mtry)
        builder.build(np.sort(boot))
        forest.append(builder.tree)
        oob.append(sorted(set(range(t)) - set(boot.tolist())))
    return SelectorModel(
        trees=forest,
        feature_manifest=list(feature_names) if feature_names is not None else [f"z{j}" for j in range(F)],
        target_manifest=list(target_names) if target_names is not None else [f"c{j}" for j in range(P.shape[1])],
        metric=metric,
        seed=seed,
        params={"trees": trees, "max_depth": max_depth, "min_leaf": min_leaf, "mtry": mtry,
                "bootstrap": True, "multi_output": True},
        oob=oob,
    )


def oob_error(model: SelectorModel, Z, P) -> float:
    """Mean squared out-of-bag error over observed targets."""
    Z = np.asarray(Z, dtype=np.float64)
    P = np.asarray(P, dtype=np.float64)
    sums = np.zeros(P.shape)
    counts = np.zeros(P.shape[0])
    for tree, rows in zip(model.trees, model.oob):
        for i in rows:
            sums[i] += tree.leaf_vector(Z[i])
            counts[i] += 1
    has = counts > 0
    pred = sums[has] / counts[has, None]
    truth = P[has]
    ok = np.isfinite(truth)
    return float(np.mean((pred[ok] - truth[ok]) ** 2))


@dataclass
class Selection:
    index: int
    config_id: str
    predicted: np.ndarray


def predict_and_select(model: SelectorModel, z_new, names: Optional[Sequence[str]] = None) -> Selection:
    """Pick the configuration with the highest predicted score (lowest index on ties).

    ``z_new`` is a :class:`~clubench.metafeat.MetaVector` or a plain vector
    with ``names``; its feature names must match the model's manifest.
    """
    if hasattr(z_new, "manifest"):
        names = z_new.names
        values = z_new.values
    else:
        values = np.asarray(z_new, dtype=np.float64)
    if names is None or list(names) != list(model.feature_manifest):
        raise SelectionError("meta-feature manifest does not match the model's")
    pred = model.predict(values[None, :])[0]
    j = int(np.argmax(pred))
    return Selection(j, model.target_manifest[j], pred)


@dataclass
class SelectionOutcome:
    dataset: int
    config_id: str
    realized: float
    strategy: str


def _realized(P, row, col) -> float:
    v = P[row, col]
    if np.isfinite(v):
        return float(v)
    # a failed configuration scores as the worst observed result on that dataset
    return float(np.nanmin(P[row]))


def baselines(P, train_rows, test_rows, strategy: str, col_names: Optional[Sequence[str]] = None
              ) -> list[SelectionOutcome]:
    """Historical-best (``"historical_best:<algo>"``) or ``"EUB"`` selections on test rows."""
    P = np.asarray(P, dtype=np.float64)
    col_names = list(col_names) if col_names is not None else [f"c{j}" for j in range(P.shape[1])]
    test_rows = list(test_rows)
    if strategy == "EUB":
        out = []
        for i in test_rows:
            j = int(np.nanargmax(P[i]))
            out.append(SelectionOutcome(i, col_names[j], float(P[i, j]), "EUB"))
        return out
    if not strategy.startswith("historical_best:"):
        raise SelectionError(f"unknown strategy {strategy!r}")
    algo = strategy.split(":", 1)[1]
    cols = [j for j, c in enumerate(col_names) if algorithm_of(c) == algo or c == algo]
    if not cols:
        raise SelectionError(f"no columns for algorithm {algo!r}")
    block = P[np.ix_(list(train_rows), cols)]
    observed = np.isfinite(block)
    if not observed.any():
        raise SelectionError(f"algorithm {algo!r} has no observed training cells")
    with np.errstate(invalid="ignore"):
        means = np.where(observed.any(axis=0), np.nanmean(np.where(observed, block, np.nan), axis=0), -np.inf)
    j = cols[int(np.argmax(means))]
    return [SelectionOutcome(i, col_names[j], _realized(P, i, j), strategy) for i in test_rows]


def fold_partition(t: int, folds: int, seed: int) -> list[np.ndarray]:
    if folds < 2:
        raise SelectionError("need at least 2 folds")
    if folds > t:
        raise SelectionError(f"{folds} folds leave some fold without datasets ({t} datasets)")
    perm = np.random.default_rng(seed).permutation(t)
    return [np.sort(part) for part in np.array_split(perm, folds)]


@dataclass
class CVReport:
    strategies: list
    table: dict  # strategy -> metric -> mean realized score
    per_fold: dict  # strategy -> metric -> list of per-fold means
    outcomes: dict = field(default_factory=dict)  # metric -> list of SelectionOutcome
    folds: list = field(default_factory=list)


METRICS = ("acc", "nmi", "ari")


def cross_validate(Z, P_acc, P_nmi, P_ari, folds: int = 5, seed: int = 0, trees: int = 200,
                   col_names: Optional[Sequence[str]] = None,
                   feature_names: Optional[Sequence[str]] = None,
                   algorithms: Optional[Sequence[str]] = None) -> CVReport:
    """Seeded k-fold protocol over datasets with regressor, EUB and historical-best rows."""
    Z = np.asarray(Z, dtype=np.float64)
    mats = {"acc": np.asarray(P_acc, float), "nmi": np.asarray(P_nmi, float), "ari": np.asarray(P_ari, float)}
    t, H = mats["acc"].shape
    if any(m.shape != (t, H) for m in mats.values()) or Z.shape[0] != t:
        raise SelectionError("meta-features and performance matrices disagree in shape")
    col_names = list(col_names) if col_names is not None else [f"c{j}" for j in range(H)]
    if algorithms is None:
        algorithms = []
        for c in col_names:
            a = algorithm_of(c)
            if a not in algorithms:
                algorithms.append(a)
    parts = fold_partition(t, folds, seed)

    strategies = ["EUB"] + [f"historical_best:{a}" for a in algorithms] + ["regressor"]
    realized = {s: {m: np.full(t, np.nan) for m in METRICS} for s in strategies}
    outcomes: dict = {m: [] for m in METRICS}
    dropped = set()
    preds: dict = {}
    for mi, m in enumerate(METRICS):
        P = mats[m]
        # an identical matrix yields an identical forest per fold
        twin = next((m2 for m2 in METRICS[:mi] if np.array_equal(mats[m2], P, equal_nan=True)), None)
        usable = np.isfinite(P).any(axis=1)
        for k, test in enumerate(parts):
            train = np.setdiff1d(np.arange(t), test)
            train = train[usable[train]]
            test = test[usable[test]]
            if test.size == 0:
                continue
            for o in baselines(P, train, test, "EUB", col_names):
                realized["EUB"][m][o.dataset] = o.realized
            for a in algorithms:
                s = f"historical_best:{a}"
                try:
                    outs = baselines(P, train, test, s, col_names)
                except SelectionError as exc:
                    logger.warning("fold %d %s: %s", k, s, exc)
                    dropped.add(s)
                    continue
                for o in outs:
                    realized[s][m][o.dataset] = o.realized
            if twin is not None and (twin, k) in preds:
                pred = preds[twin, k]
            else:
                model = fit(Z[train], P[train], trees=trees, seed=seed + 7919 * k,
                            feature_names=feature_names, target_names=col_names, metric=m)
                pred = model.predict(Z[test])
            preds[m, k] = pred
            for row, i in enumerate(test):
                j = int(np.argmax(pred[row]))
                o = SelectionOutcome(int(i), col_names[j], _realized(P, i, j), "regressor")
                outcomes[m].append(o)
                realized["regressor"][m][i] = o.realized

    strategies = [s for s in strategies if s not in dropped]
    table, per_fold = {}, {}
    for s in strategies:
        table[s] = {m: float(np.nanmean(realized[s][m])) for m in METRICS}
        per_fold[s] = {m: [float(np.nanmean(realized[s][m][p])) if np.isfinite(realized[s][m][p]).any()
                           else math.nan for p in parts] for m in METRICS}
    return CVReport(strategies, table, per_fold, outcomes, [p.tolist() for p in parts])


def write_cv_table(report: CVReport, path) -> None:
    """Strategy x metric CSV, EUB first and the regressor last, scores in percent."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["strategy", "acc", "nmi", "ari"])
        for s in report.strategies:
            w.writerow([s] + [f"{100.0 * report.table[s][m]:.2f}" for m in METRICS])
