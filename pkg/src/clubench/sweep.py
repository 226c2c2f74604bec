"""Hyperparameter grids, the (dataset x config x repeat) sweep, and Table-2 style summaries."""

from __future__ import annotations

import csv
import hashlib
import itertools
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .cluster import (ALGORITHMS, NO_K, SEARCH_SPACE, AlgorithmConfig, ClusteringError,
                      ConfigError, algorithm_of, fit_predict, scale_bases)
from .cluster import SCALE_SEED
from .data import Dataset
from .metrics import external_scores

logger = logging.getLogger(__name__)

METRIC_NAMES = ("acc", "nmi", "ari")
RESULT_COLUMNS = ("dataset", "config_id", "repeat", "seed", "acc", "nmi", "ari", "time_s")


@dataclass(frozen=True)
class Grid:
    algorithm: str
    configs: tuple
    default_index: int = 0

    def __post_init__(self):
        if not self.configs:
            raise ConfigError(f"{self.algorithm}: empty grid")
        if not 0 <= self.default_index < len(self.configs):
            raise ConfigError(f"{self.algorithm}: default_index {self.default_index} out of range")

    @property
    def config_ids(self) -> list[str]:
        return [c.config_id for c in self.configs]

    @property
    def default_id(self) -> str:
        return self.configs[self.default_index].config_id


def _product(block: dict) -> list[dict]:
    keys = list(block)
    return [dict(zip(keys, values)) for values in itertools.product(*(block[k] for k in keys))]


def enumerate_grid(algorithm: str, rows=None, default_index: int = 0) -> Grid:
    """Full Cartesian product of an algorithm's search space, first key slowest.

    ``rows`` overrides the search space with a mapping ``param -> values`` (or
    a list of such mappings); every value must lie in the built-in range.
    """
    if algorithm not in SEARCH_SPACE:
        raise ConfigError(f"unknown algorithm {algorithm!r}")
    if rows is None:
        blocks = SEARCH_SPACE[algorithm]
    else:
        blocks = [rows] if isinstance(rows, dict) else list(rows)
    configs = []
    for block in blocks:
        for params in _product(block):
            configs.append(AlgorithmConfig(algorithm, params))
    ids = [c.config_id for c in configs]
    if len(set(ids)) != len(ids):
        raise ConfigError(f"{algorithm}: grid contains duplicate configurations")
    return Grid(algorithm, tuple(configs), default_index)


def all_grids(algorithms: Optional[Iterable[str]] = None) -> list[Grid]:
    return [enumerate_grid(a) for a in (algorithms or ALGORITHMS)]


def load_grid(path) -> Grid:
    """Grid override file: ``{"algorithm": ..., "rows": {...}, "default_index": 0}``."""
    spec = json.loads(Path(path).read_text(encoding="utf-8"))
    return enumerate_grid(spec["algorithm"], spec.get("rows"), int(spec.get("default_index", 0)))


@dataclass
class RunResult:
    dataset: str
    config_id: str
    repeat: int
    seed: int
    labels: Optional[np.ndarray]
    acc: Optional[float]
    nmi: Optional[float]
    ari: Optional[float]
    time_s: float

    @property
    def missing(self) -> bool:
        return self.labels is None and self.acc is None

    def metric(self, name: str) -> Optional[float]:
        return getattr(self, name)


def cell_seed(base_seed: int, dataset: str, config_id: str, repeat: int) -> int:
    key = f"{base_seed}|{dataset}|{config_id}|{repeat}".encode("utf-8")
    return int.from_bytes(hashlib.sha256(key).digest()[:4], "little")


def dataset_bases(d: Dataset) -> dict:
    """Scale bases for every metric the grids may ask for; failures map to None."""
    out = {}
    for metric in ("euclidean", "manhattan", "cosine"):
        try:
            out[metric] = scale_bases(d.X, metric, seed=SCALE_SEED)
        except (ClusteringError, ValueError):
            out[metric] = None
    return out


def run_cell(d: Dataset, cfg: AlgorithmConfig, repeat: int, base_seed: int,
             bases: Optional[dict] = None) -> RunResult:
    seed = cell_seed(base_seed, d.name, cfg.config_id, repeat)
    bound = cfg.with_k(d.K)
    labels = None
    t0 = time.perf_counter()
    try:
        if bases is not None and any(v is None for v in bases.values()):
            bases = {k: v for k, v in bases.items() if v is not None}
        labels = fit_predict(bound, d.X, seed=seed, bases=bases)
    except (ClusteringError, ConfigError) as exc:
        logger.debug("cell failed %s %s r%d: %s", d.name, cfg.config_id, repeat, exc)
    except Exception as exc:  # noqa: BLE001 - a cell must never abort the sweep
        logger.warning("unexpected failure %s %s r%d: %r", d.name, cfg.config_id, repeat, exc)
    elapsed = time.perf_counter() - t0
    scores = {"acc": None, "nmi": None, "ari": None}
    if labels is not None and d.y is not None:
        scores = external_scores(d.y, labels)
    return RunResult(d.name, cfg.config_id, repeat, seed, labels, scores["acc"], scores["nmi"],
                     scores["ari"], elapsed)


_WORKER_STATE: dict = {}


def _init_worker(datasets, bases, base_seed):
    _WORKER_STATE["datasets"] = datasets
    _WORKER_STATE["bases"] = bases
    _WORKER_STATE["base_seed"] = base_seed


def _run_task(task):
    di, config_id, repeat = task
    d = _WORKER_STATE["datasets"][di]
    cfg = AlgorithmConfig.from_id(config_id)
    return run_cell(d, cfg, repeat, _WORKER_STATE["base_seed"], _WORKER_STATE["bases"][di])


def run_sweep(datasets: Sequence[Dataset], grids: Sequence[Grid], repeats: int = 5,
              base_seed: int = 0, workers: int = 1) -> list[RunResult]:
    """Run every (dataset, config, repeat) cell.

    Results come back in enumeration order (dataset, grid, config, repeat)
    whatever the worker count; failed cells carry ``labels=None``.
    """
    if repeats < 1:
        raise ValueError("repeats must be at least 1")
    names = [d.name for d in datasets]
    if len(set(names)) != len(names):
        raise ValueError("dataset names must be unique")
    bases = [dataset_bases(d) for d in datasets]
    tasks = [(di, cfg.config_id, r)
             for di in range(len(datasets))
             for g in grids for cfg in g.configs
             for r in range(repeats)]
    if workers <= 1:
        _init_worker(list(datasets), bases, base_seed)
        try:
            return [_run_task(t) for t in tasks]
        finally:
            _WORKER_STATE.clear()
    chunk = max(1, len(tasks) // (workers * 8))
    with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                             initargs=(list(datasets), bases, base_seed)) as pool:
        return list(pool.map(_run_task, tasks, chunksize=chunk))


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def write_results(results: Iterable[RunResult], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for r in results:
            w.writerow([r.dataset, r.config_id, r.repeat, r.seed,
                        _fmt(r.acc), _fmt(r.nmi), _fmt(r.ari), _fmt(r.time_s)])


def read_results(path) -> list[RunResult]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such results file: {path}")
    out = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing_cols = set(RESULT_COLUMNS) - set(reader.fieldnames or [])
        if missing_cols:
            raise ValueError(f"{path}: missing columns {sorted(missing_cols)}")
        for row in reader:
            vals = {k: (float(row[k]) if row[k] != "" else None) for k in METRIC_NAMES}
            out.append(RunResult(row["dataset"], row["config_id"], int(row["repeat"]),
                                 int(row["seed"]), None, vals["acc"], vals["nmi"], vals["ari"],
                                 float(row["time_s"]) if row["time_s"] else 0.0))
    return out


def reduce_repeats(results: Iterable[RunResult], metric: str, reducer: str = "mean") -> dict:
    """(dataset, config_id) -> reduced metric over observed repeats (None if none)."""
    if reducer not in ("mean", "median"):
        raise ValueError(f"unknown reducer {reducer!r}")
    cells: dict = {}
    for r in results:
        cells.setdefault((r.dataset, r.config_id), []).append(r.metric(metric))
    out = {}
    for key, vals in cells.items():
        obs = [v for v in vals if v is not None]
        if not obs:
            out[key] = None
        else:
            out[key] = float(np.mean(obs) if reducer == "mean" else np.median(obs))
    return out


def _default_ids(grids: Optional[Sequence[Grid]]) -> dict:
    defaults = {a: enumerate_grid(a).default_id for a in ALGORITHMS}
    for g in grids or ():
        defaults[g.algorithm] = g.default_id
    return defaults


def summary_table(results: Sequence[RunResult], grids: Optional[Sequence[Grid]] = None,
                  reducer: str = "mean") -> list[dict]:
    """Per-algorithm mean ACC/NMI/ARI for the default config and the per-dataset best.

    Both modes average over the datasets where the default config was
    observed, so ``best >= default`` holds per algorithm and metric.
    """
    if not results:
        raise ValueError("no results to summarise")
    defaults = _default_ids(grids)
    algos = []
    for r in results:
        a = algorithm_of(r.config_id)
        if a not in algos:
            algos.append(a)
    algos.sort(key=lambda a: ALGORITHMS.index(a) if a in ALGORITHMS else len(ALGORITHMS))
    reduced = {m: reduce_repeats(results, m, reducer) for m in METRIC_NAMES}
    datasets = sorted({r.dataset for r in results})
    rows = []
    for algo in algos:
        row = {"algorithm": algo}
        any_value = False
        for m in METRIC_NAMES:
            cells = {k: v for k, v in reduced[m].items() if algorithm_of(k[1]) == algo}
            default_vals, best_vals = [], []
            for ds in datasets:
                vals = [v for (d, _), v in cells.items() if d == ds and v is not None]
                if not vals:
                    continue
                dv = cells.get((ds, defaults.get(algo)))
                if dv is None:
                    continue
                default_vals.append(dv)
                best_vals.append(max(vals))
            if best_vals:
                any_value = True
                row[f"default_{m}"] = float(np.mean(default_vals))
                row[f"best_{m}"] = float(np.mean(best_vals))
                row[f"delta_{m}"] = row[f"best_{m}"] - row[f"default_{m}"]
            else:
                row[f"default_{m}"] = row[f"best_{m}"] = row[f"delta_{m}"] = math.nan
        if not any_value:
            logger.warning("all cells missing for %s; omitted from summary", algo)
            continue
        rows.append(row)
    return rows


def summarize(results: Sequence[RunResult], mode: str = "best",
              grids: Optional[Sequence[Grid]] = None, reducer: str = "mean") -> dict:
    """``{algorithm: {acc, nmi, ari}}`` for ``mode`` in {"default", "best"}."""
    if mode not in ("default", "best"):
        raise ValueError(f"unknown mode {mode!r}")
    return {row["algorithm"]: {m: row[f"{mode}_{m}"] for m in METRIC_NAMES}
            for row in summary_table(results, grids, reducer)}


SUMMARY_COLUMNS = ["algorithm"] + [f"{mode}_{m}" for mode in ("default", "best", "delta")
                                   for m in METRIC_NAMES]


def write_summary(rows: Sequence[dict], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for row in rows:
            w.writerow([row["algorithm"]] + [f"{row[c]:.4f}" for c in SUMMARY_COLUMNS[1:]])
