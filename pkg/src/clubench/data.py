"""Dataset ingestion, preprocessing and dataset-level statistics.

A :class:`Dataset` is an immutable bundle of a feature matrix, optional
ground-truth labels and the cluster count ``K``.  Datasets live on disk as
UTF-8 CSV files with a header row; an optional JSON sidecar next to the CSV
(``name.json``) may declare ``name``, ``modality`` and ``K``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

MODALITIES = ("tabular", "image", "text", "bioinfo")


class DataError(ValueError):
    """Raised when a dataset cannot be loaded or violates its invariants."""


@dataclass(frozen=True, eq=False)
class Dataset:
    name: str
    X: np.ndarray
    y: Optional[np.ndarray] = None
    K: int = 0
    modality: str = "tabular"

    def __post_init__(self):
        X = np.ascontiguousarray(np.asarray(self.X, dtype=np.float64))
        if X.ndim != 2:
            raise DataError("X must be a 2-d matrix")
        n, m = X.shape
        if n < 2 or m < 1:
            raise DataError(f"dataset {self.name!r} is empty or too small ({n}x{m})")
        if not np.all(np.isfinite(X)):
            raise DataError(f"dataset {self.name!r} contains NaN/Inf features")
        X.setflags(write=False)
        object.__setattr__(self, "X", X)

        K = int(self.K)
        if self.y is not None:
            y = np.asarray(self.y)
            if y.shape != (n,):
                raise DataError("label vector length does not match X")
            if not np.issubdtype(y.dtype, np.integer):
                raise DataError("labels must be integers")
            y = y.astype(np.int64)
            k_true = int(y.max()) + 1 if n else 0
            if y.min() < 0 or np.bincount(y, minlength=k_true).min() == 0:
                raise DataError("labels must be contiguous integers 0..K-1")
            y.setflags(write=False)
            object.__setattr__(self, "y", y)
            if K == 0:
                K = k_true
            elif K != k_true:
                raise DataError(f"declared K={K} but labels have {k_true} classes")
        if K < 1:
            raise DataError("K must be a positive integer")
        if K >= n:
            raise DataError(f"K={K} must be smaller than n={n}")
        object.__setattr__(self, "K", K)
        if self.modality not in MODALITIES:
            raise DataError(f"unknown modality {self.modality!r}")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def m(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class ImbalanceStats:
    r_mm: float
    r_ma: float
    IR: float


@dataclass(frozen=True)
class GroupTag:
    dim_group: str
    ir_group: str
    modality: str = "tabular"


def relabel(values) -> np.ndarray:
    """Map arbitrary hashable labels to 0..K-1 in order of first occurrence."""
    mapping: dict = {}
    out = np.empty(len(values), dtype=np.int64)
    for i, v in enumerate(values):
        out[i] = mapping.setdefault(v, len(mapping))
    return out


def load_csv(path, label_column: Optional[str] = "label", name: Optional[str] = None,
             modality: Optional[str] = None, K: Optional[int] = None) -> Dataset:
    """Load a dataset from CSV.

    ``label_column`` names the ground-truth column; when it is ``"label"``
    (the default) and absent from the header, the dataset is loaded
    unlabeled.  A sidecar ``<stem>.json`` supplies defaults for ``name``,
    ``modality`` and ``K``.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such dataset file: {path}")
    sidecar = path.with_suffix(".json")
    meta = json.loads(sidecar.read_text(encoding="utf-8")) if sidecar.is_file() else {}

    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: empty file")
    header, body = rows[0], [r for r in rows[1:] if r]
    if not body:
        raise DataError(f"{path}: empty dataset")

    label_idx = None
    if label_column is not None:
        if label_column in header:
            label_idx = header.index(label_column)
        elif label_column != "label":
            raise DataError(f"{path}: label column {label_column!r} not found")
    feat_idx = [j for j in range(len(header)) if j != label_idx]
    if not feat_idx:
        raise DataError(f"{path}: no feature columns")

    X = np.empty((len(body), len(feat_idx)))
    for i, row in enumerate(body):
        if len(row) != len(header):
            raise DataError(f"{path}: row {i + 2} has {len(row)} fields, expected {len(header)}")
        for jj, j in enumerate(feat_idx):
            try:
                v = float(row[j])
            except ValueError:
                raise DataError(f"{path}: non-numeric feature at row {i + 2}, column {header[j]!r}") from None
            if not math.isfinite(v):
                raise DataError(f"{path}: non-numeric feature at row {i + 2}, column {header[j]!r}")
            X[i, jj] = v

    y = None
    if label_idx is not None:
        y = relabel([row[label_idx] for row in body])
        if y.max() + 1 < 2:
            raise DataError(f"{path}: label column has a single distinct value")

    return Dataset(
        name=name or meta.get("name") or path.stem,
        X=X,
        y=y,
        K=K or (0 if y is not None else int(meta.get("K", 0))),
        modality=modality or meta.get("modality", "tabular"),
    )


def load_dir(directory, label_column: Optional[str] = "label") -> list[Dataset]:
    """Load every ``*.csv`` in a directory, sorted by file name."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"no such data directory: {directory}")
    files = sorted(directory.glob("*.csv"))
    if not files:
        raise DataError(f"{directory}: no CSV datasets found")
    return [load_csv(f, label_column=label_column) for f in files]


def save_csv(d: Dataset, path) -> None:
    """Write a dataset as CSV (features ``x0..``, then ``label``) plus JSON sidecar."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        cols = [f"x{j}" for j in range(d.m)]
        w.writerow(cols + (["label"] if d.y is not None else []))
        for i in range(d.n):
            row = [repr(float(v)) for v in d.X[i]]
            if d.y is not None:
                row.append(str(int(d.y[i])))
            w.writerow(row)
    path.with_suffix(".json").write_text(
        json.dumps({"name": d.name, "modality": d.modality, "K": d.K}, sort_keys=True) + "\n",
        encoding="utf-8")


def standardize(X: np.ndarray) -> np.ndarray:
    """Z-score columns (population std); constant columns become all zeros."""
    X = np.asarray(X, dtype=np.float64)
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    Z = X - mu
    const = sd <= 1e-12 * np.maximum(1.0, np.abs(mu))
    Z[:, const] = 0.0
    Z[:, ~const] /= sd[~const]
    return Z


def subsample_indices(n: int, cap: int, seed: int) -> np.ndarray:
    """Sorted uniform-without-replacement row indices, deterministic in seed."""
    if n <= cap:
        return np.arange(n)
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n, size=cap, replace=False))


def preprocess(d: Dataset, standardize: bool = True, cap: int = 10000, seed: int = 0) -> Dataset:
    """Subsample to at most ``cap`` rows, then optionally z-score the features."""
    if cap < 2:
        raise DataError("cap must be at least 2")
    idx = subsample_indices(d.n, cap, seed)
    X = d.X[idx]
    y = None if d.y is None else d.y[idx]
    K = d.K
    if y is not None:
        # a subsample can drop a rare class entirely
        y = np.unique(y, return_inverse=True)[1].astype(np.int64)
        K = 0
    if standardize:
        X = _standardize(X)
    return replace(d, X=X, y=y, K=K)


_standardize = standardize


def imbalance_stats(y) -> ImbalanceStats:
    y = np.asarray(y)
    if y.size == 0:
        raise DataError("empty label vector")
    _, counts = np.unique(y, return_counts=True)
    if counts.size < 2:
        raise DataError("imbalance statistics need at least two classes")
    p = counts / counts.sum()
    return ImbalanceStats(
        r_mm=float(counts.min() / counts.max()),
        r_ma=float(counts.min() / counts.sum()),
        IR=float(p.std()),
    )


def dim_group(m: int) -> str:
    if m <= 100:
        return "low"
    return "mid" if m <= 500 else "high"


def ir_group(ir: float) -> str:
    if ir < 0.1:
        return "low"
    return "mid" if ir <= 0.3 else "high"


def group_assign(d: Dataset, s: ImbalanceStats) -> GroupTag:
    return GroupTag(dim_group=dim_group(d.m), ir_group=ir_group(s.IR), modality=d.modality)
