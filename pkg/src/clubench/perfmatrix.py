"""Performance matrices: construction, spectrum, MCAR masking, low-rank completion, ranks."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .cluster import ALGORITHMS, algorithm_of
from .sweep import RunResult

METRIC_RANGE = {"acc": (0.0, 1.0), "nmi": (0.0, 1.0), "ari": (-1.0, 1.0)}
RIDGE = 1e-6


class MatrixError(ValueError):
    pass


@dataclass
class PerformanceMatrix:
    P: np.ndarray
    row_names: list
    col_names: list
    metric: str = "acc"
    mask: Optional[np.ndarray] = None

    def __post_init__(self):
        self.P = np.asarray(self.P, dtype=np.float64)
        if self.P.shape != (len(self.row_names), len(self.col_names)):
            raise MatrixError("matrix shape does not match its headers")
        if self.mask is None:
            self.mask = np.isfinite(self.P)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.shape != self.P.shape:
            raise MatrixError("mask shape does not match the matrix")
        self.P = np.where(self.mask, self.P, np.nan)

    @property
    def shape(self):
        return self.P.shape

    def submatrix(self, rows=None, cols=None) -> "PerformanceMatrix":
        ri = np.arange(len(self.row_names)) if rows is None else np.asarray(rows)
        ci = np.arange(len(self.col_names)) if cols is None else np.asarray(cols)
        return PerformanceMatrix(self.P[np.ix_(ri, ci)], [self.row_names[i] for i in ri],
                                 [self.col_names[j] for j in ci], self.metric,
                                 self.mask[np.ix_(ri, ci)])


def _config_order(config_id: str, first_seen: dict):
    algo = algorithm_of(config_id)
    a = ALGORITHMS.index(algo) if algo in ALGORITHMS else len(ALGORITHMS)
    return (a, first_seen[config_id])


def build_matrix(results: Sequence[RunResult], metric: str = "acc") -> PerformanceMatrix:
    """Datasets x configs matrix of the repeat-mean metric; failed cells unobserved."""
    if metric not in METRIC_RANGE:
        raise MatrixError(f"unknown metric {metric!r}")
    seen = set()
    rows: list = []
    first_seen: dict = {}
    cells: dict = {}
    for r in results:
        key = (r.dataset, r.config_id, r.repeat)
        if key in seen:
            raise MatrixError(f"duplicate result for {key}")
        seen.add(key)
        if r.dataset not in rows:
            rows.append(r.dataset)
        first_seen.setdefault(r.config_id, len(first_seen))
        v = r.metric(metric)
        cells.setdefault((r.dataset, r.config_id), [])
        if v is not None:
            cells[(r.dataset, r.config_id)].append(v)
    rows.sort()
    cols = sorted(first_seen, key=lambda c: _config_order(c, first_seen))
    P = np.full((len(rows), len(cols)), np.nan)
    ri = {n: i for i, n in enumerate(rows)}
    ci = {n: j for j, n in enumerate(cols)}
    for (d, c), vals in cells.items():
        if vals:
            P[ri[d], ci[c]] = float(np.mean(vals))
    return PerformanceMatrix(P, rows, cols, metric)


def write_matrix(pm: PerformanceMatrix, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([""] + list(pm.col_names))
        for i, name in enumerate(pm.row_names):
            w.writerow([name] + ["" if not pm.mask[i, j] else repr(float(pm.P[i, j]))
                                 for j in range(len(pm.col_names))])


def read_matrix(path, metric: str = "acc") -> PerformanceMatrix:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such matrix file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if len(rows) < 2:
        raise MatrixError(f"{path}: matrix needs a header and at least one row")
    cols = rows[0][1:]
    names, data = [], []
    for r in rows[1:]:
        if len(r) != len(cols) + 1:
            raise MatrixError(f"{path}: ragged row for {r[0]!r}")
        names.append(r[0])
        data.append([float(v) if v != "" else np.nan for v in r[1:]])
    return PerformanceMatrix(np.array(data, dtype=np.float64).reshape(len(names), len(cols)),
                             names, cols, metric)


def singular_values(P) -> np.ndarray:
    P = np.asarray(P, dtype=np.float64)
    if not np.all(np.isfinite(P)):
        raise MatrixError("spectrum is undefined on a matrix with unobserved entries")
    return np.linalg.svd(P, compute_uv=False)


def ccr(P, j: int) -> float:
    """Share of the singular-value sum carried by the top ``j`` singular values."""
    s = singular_values(P)
    if not 1 <= j <= s.size:
        raise MatrixError(f"j must lie in [1, {s.size}]")
    total = s.sum()
    if total == 0:
        raise MatrixError("ccr is undefined for the zero matrix")
    return float(s[:j].sum() / total)


def ccr_curve(P) -> np.ndarray:
    s = singular_values(P)
    return np.cumsum(s) / s.sum()


def mcar_mask(P, mr: float, seed: int = 0, observed=None, max_tries: int = 100) -> np.ndarray:
    """Observation mask hiding exactly ``round(mr * #observed)`` entries at random.

    Every row and column keeps at least one observation; the shuffle is
    redrawn up to ``max_tries`` times to achieve that.
    """
    if not 0.0 < mr < 1.0:
        raise MatrixError("mr must be in (0,1)")
    P = np.asarray(P)
    base = np.isfinite(P) if observed is None else np.asarray(observed, dtype=bool)
    obs_idx = np.flatnonzero(base.ravel())
    n_hide = int(round(mr * obs_idx.size))
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        hide = rng.permutation(obs_idx)[:n_hide]
        mask = base.copy().ravel()
        mask[hide] = False
        mask = mask.reshape(P.shape)
        if mask.any(axis=1).all() and mask.any(axis=0).all():
            return mask
    raise MatrixError("could not draw a mask leaving every row and column observed")


@dataclass
class Factorization:
    U: np.ndarray
    V: np.ndarray
    r: int
    history: list = field(default_factory=list)
    iters: int = 0

    @property
    def reconstruction(self) -> np.ndarray:
        return self.U @ self.V.T


def observed_residual(P, mask, U, V) -> float:
    R = np.where(mask, U @ V.T - np.nan_to_num(P), 0.0)
    return float((R * R).sum())


def _objective(P0, mask, U, V):
    R = np.where(mask, U @ V.T - P0, 0.0)
    return float((R * R).sum())


def _solve_rows(P0, mask, F, ridge, prev):
    """Least squares for every row given the opposite factor F, damped towards ``prev``.

    The proximal term ``ridge * ||row - prev_row||^2`` keeps rows with few
    observations well posed without biasing the fixed point.
    """
    r = F.shape[1]
    W = mask.astype(np.float64)
    # per-row Gram matrices F^T diag(w_i) F as one product with the outer-product table
    outer = (F[:, :, None] * F[:, None, :]).reshape(F.shape[0], r * r)
    G = (W @ outer).reshape(W.shape[0], r, r)
    G += ridge * np.eye(r)
    b = (W * P0) @ F + ridge * prev
    return np.linalg.solve(G, b[:, :, None])[:, :, 0]


def complete(P, mask, r: int = 60, iters: int = 300, tol: float = 1e-8,
             ridge: float = RIDGE) -> Factorization:
    """Rank-``r`` factorisation fitted to the observed entries by alternating least squares.

    Starts from the rank-``r`` SVD of the zero-filled observed matrix split
    as ``U0 S^1/2``, ``V0 S^1/2``.  Each half-step exactly minimises the
    observed residual plus ``ridge`` times the squared step, so the recorded
    observed residual never increases.  Stops once an
    iteration improves the objective by less than ``tol * ||P_Omega||_F^2``.
    """
    P = np.asarray(P, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    N, H = P.shape
    if not mask.any(axis=1).all() or not mask.any(axis=0).all():
        raise MatrixError("every row and column needs at least one observed entry")
    if not 1 <= r <= min(N, H):
        raise MatrixError(f"rank r={r} must lie in [1, {min(N, H)}]")
    P0 = np.where(mask, P, 0.0)
    if not np.all(np.isfinite(P0)):
        raise MatrixError("observed entries must be finite")
    u, s, vt = np.linalg.svd(P0, full_matrices=False)
    root = np.sqrt(s[:r])
    U = u[:, :r] * root
    V = vt[:r].T * root
    history = [_objective(P0, mask, U, V)]
    scale = max(float((P0 * P0).sum()), np.finfo(float).tiny)
    it = 0
    for it in range(1, iters + 1):
        U = _solve_rows(P0, mask, V, ridge, U)
        history.append(_objective(P0, mask, U, V))
        V = _solve_rows(P0.T, mask.T, U, ridge, V)
        history.append(_objective(P0, mask, U, V))
        # improvement measured against the scale of the observed data
        if history[-3] - history[-1] < tol * scale:
            break
    return Factorization(U=U, V=V, r=r, history=history, iters=it)


def clamp(P_hat, metric: str) -> np.ndarray:
    lo, hi = METRIC_RANGE[metric]
    return np.clip(P_hat, lo, hi)


def mape(P_true, P_hat, mask_eval, floor: float = 1e-3) -> float:
    P_true = np.asarray(P_true, dtype=np.float64)
    P_hat = np.asarray(P_hat, dtype=np.float64)
    mask_eval = np.asarray(mask_eval, dtype=bool)
    if P_true.shape != P_hat.shape or P_true.shape != mask_eval.shape:
        raise MatrixError("shape mismatch")
    if not mask_eval.any():
        raise MatrixError("empty evaluation set")
    t = P_true[mask_eval]
    h = P_hat[mask_eval]
    return float(np.mean(np.abs(h - t) / np.maximum(np.abs(t), floor)))


def completion_trial(P, mr: float, r: int, seed: int, metric: str = "acc",
                     iters: int = 300, tol: float = 1e-8) -> dict:
    """Hide entries MCAR, complete, and score MAPE on the hidden entries."""
    P = np.asarray(P, dtype=np.float64)
    observed = np.isfinite(P)
    mask = mcar_mask(P, mr, seed, observed=observed)
    fac = complete(P, mask, r=r, iters=iters, tol=tol)
    hidden = observed & ~mask
    return {"seed": seed, "mape": mape(P, clamp(fac.reconstruction, metric), hidden),
            "iters": fac.iters}


def completion_report(P, mr: float, r: int = 60, seeds: Sequence[int] = range(5),
                      metric: str = "acc", iters: int = 300, tol: float = 1e-8) -> dict:
    trials = [completion_trial(P, mr, r, s, metric, iters, tol) for s in seeds]
    values = np.array([t["mape"] for t in trials])
    return {
        "r": r,
        "iters": iters,
        "mr": mr,
        "seeds": [int(s) for s in seeds],
        "mape_mean": float(values.mean()),
        "mape_std": float(values.std()),
        "mape_per_seed": [float(v) for v in values],
    }


def best_per_algorithm(pm: PerformanceMatrix) -> PerformanceMatrix:
    """N x M matrix: each algorithm's best config score per dataset."""
    algos = []
    for c in pm.col_names:
        a = algorithm_of(c)
        if a not in algos:
            algos.append(a)
    out = np.full((len(pm.row_names), len(algos)), np.nan)
    for j, a in enumerate(algos):
        cols = [k for k, c in enumerate(pm.col_names) if algorithm_of(c) == a]
        block = pm.P[:, cols]
        has = np.isfinite(block).any(axis=1)
        out[has, j] = np.nanmax(block[has], axis=1)
    return PerformanceMatrix(out, list(pm.row_names), algos, pm.metric)


@dataclass
class RankTest:
    names: list
    avg_ranks: np.ndarray
    pvalues: np.ndarray
    degenerate: np.ndarray


def ranks_and_tests(P, names: Optional[Sequence[str]] = None) -> RankTest:
    """Average per-dataset rank (1 = best, ties averaged) and paired t-test p-values.

    Pairs whose differences are constant and nonzero have an infinite t
    statistic; their p-value is reported as 0 and flagged degenerate.
    Identical columns get p = 1.
    """
    P = np.asarray(P, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] < 2:
        raise MatrixError("ranking needs at least two datasets")
    if P.shape[1] < 2:
        raise MatrixError("ranking needs at least two algorithms")
    if not np.all(np.isfinite(P)):
        raise MatrixError("ranking needs a fully observed matrix")
    N, M = P.shape
    ranks = np.vstack([stats.rankdata(-row, method="average") for row in P])
    pvals = np.ones((M, M))
    degenerate = np.zeros((M, M), dtype=bool)
    for a in range(M):
        for b in range(a + 1, M):
            diff = P[:, a] - P[:, b]
            if np.all(diff == 0):
                p = 1.0
            elif np.ptp(diff) == 0:
                p = 0.0
                degenerate[a, b] = degenerate[b, a] = True
            else:
                p = float(stats.ttest_rel(P[:, a], P[:, b]).pvalue)
                if math.isnan(p):
                    p = 1.0
            pvals[a, b] = pvals[b, a] = p
    return RankTest(list(names) if names is not None else [str(j) for j in range(M)],
                    ranks.mean(axis=0), pvals, degenerate)


def performance_vectors(P_acc, P_nmi, P_ari):
    """Algorithm view ``[P_acc^T; P_nmi^T; P_ari^T]`` laid side by side (M x 3N)
    and dataset view ``[P_acc, P_nmi, P_ari]`` (N x 3M)."""
    mats = [np.asarray(p, dtype=np.float64) for p in (P_acc, P_nmi, P_ari)]
    if not (mats[0].shape == mats[1].shape == mats[2].shape):
        raise MatrixError("metric matrices must share one shape")
    algo_view = np.hstack([p.T for p in mats])
    data_view = np.hstack(mats)
    return algo_view, data_view
