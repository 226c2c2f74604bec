"""Command-line entry point: ``clubench <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 runtime failure.  Every subcommand
writes its files under ``--out`` and prints one JSON status line on stdout.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import perfmatrix, select, sweep
from .cluster import ALGORITHMS, ConfigError
from .data import (Dataset, DataError, group_assign, imbalance_stats, load_dir, preprocess,
                   save_csv)
from .metafeat import meta_vector, read_meta, write_meta

logger = logging.getLogger("clubench")

DEMO_KINDS = ("blobs", "rings", "aniso", "moons", "imbalanced", "highdim")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage().strip()}")


def _default_seed() -> int:
    raw = os.environ.get("CLUBENCH_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"CLUBENCH_SEED must be an integer, got {raw!r}") from None


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _load_datasets(directory, standardize: bool, seed: int) -> list[Dataset]:
    return [preprocess(d, standardize=standardize, seed=seed) for d in load_dir(directory)]


# ---------------------------------------------------------------- demo data

def _blobs(rng, centers, n, sigma=1.0, sizes=None):
    K = len(centers)
    if sizes is None:
        sizes = [n // K + (1 if k < n % K else 0) for k in range(K)]
    X = np.vstack([rng.normal(c, sigma, size=(s, len(c))) for c, s in zip(centers, sizes)])
    y = np.repeat(np.arange(K), sizes)
    return X, y


def demo_dataset(kind: str, n: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Synthetic benchmark dataset of one of the :data:`DEMO_KINDS`."""
    if kind == "blobs":
        K = int(rng.integers(3, 5))
        centers = [(10.0 * np.cos(2 * np.pi * k / K), 10.0 * np.sin(2 * np.pi * k / K)) for k in range(K)]
        return _blobs(rng, centers, n)
    if kind == "rings":
        half = n // 2
        t = rng.uniform(0, 2 * np.pi, n)
        radius = np.where(np.arange(n) < half, 1.0, 4.0) + rng.normal(0, 0.1, n)
        X = np.column_stack([radius * np.cos(t), radius * np.sin(t)])
        return X, (np.arange(n) >= half).astype(int)
    if kind == "aniso":
        X, y = _blobs(rng, [(0.0, 0.0), (6.0, 6.0), (12.0, 0.0)], n)
        return X @ np.array([[0.6, -0.6], [-0.4, 0.8]]), y
    if kind == "moons":
        half = n // 2
        t1 = rng.uniform(0, np.pi, half)
        t2 = rng.uniform(0, np.pi, n - half)
        X = np.vstack([np.column_stack([np.cos(t1), np.sin(t1)]),
                       np.column_stack([1 - np.cos(t2), 0.5 - np.sin(t2)])])
        return X + rng.normal(0, 0.08, X.shape), np.repeat([0, 1], [half, n - half])
    if kind == "imbalanced":
        sizes = [int(0.7 * n), int(0.2 * n)]
        sizes.append(n - sum(sizes))
        return _blobs(rng, [(0.0, 0.0), (8.0, 0.0), (0.0, 8.0)], n, sizes=sizes)
    if kind == "highdim":
        m = 120
        centers = [rng.normal(0, 1.5, m) for _ in range(4)]
        return _blobs(rng, centers, n)
    raise ValueError(f"unknown demo kind {kind!r}")


def cmd_demo(args) -> dict:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for i in range(args.n_datasets):
        kind = DEMO_KINDS[i % len(DEMO_KINDS)]
        rng = np.random.default_rng([args.seed, i])
        X, y = demo_dataset(kind, args.n, rng)
        name = f"{kind}_{i:02d}"
        path = out / f"{name}.csv"
        save_csv(Dataset(name, X, y), path)
        written.append(str(path))
    return {"datasets": len(written), "outputs": written}


# ---------------------------------------------------------------- sweep & tables

def _parse_algos(text):
    if text is None or text == "all":
        return list(ALGORITHMS)
    algos = [a.strip() for a in text.split(",") if a.strip()]
    unknown = [a for a in algos if a not in ALGORITHMS]
    if unknown:
        raise UsageError(f"unknown algorithms: {', '.join(unknown)}")
    return algos


def cmd_sweep(args) -> dict:
    algos = _parse_algos(args.algos)
    overrides = {g.algorithm: g for g in (sweep.load_grid(p) for p in args.grid or [])}
    grids = [overrides.get(a) or sweep.enumerate_grid(a) for a in algos]
    datasets = _load_datasets(args.data, not args.raw, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    results = sweep.run_sweep(datasets, grids, repeats=args.repeats, base_seed=args.seed,
                              workers=args.workers)
    path = out / "results.csv"
    sweep.write_results(results, path)
    missing = sum(r.acc is None for r in results)
    # run metadata lives in a sidecar so results.csv stays reproducible
    _write_json(out / "sweep.meta.json", {
        "created": datetime.now(timezone.utc).isoformat(),
        "elapsed_s": time.time() - t0,
        "workers": args.workers,
        "seed": args.seed,
        "repeats": args.repeats,
        "algorithms": algos,
        "default_configs": {g.algorithm: g.default_id for g in grids},
        "reducer": args.reducer,
        "units": {"acc": "fraction", "nmi": "fraction", "ari": "index in [-1,1]",
                  "time_s": "seconds of fit_predict wall clock"},
    })
    return {"rows": len(results), "missing": missing, "outputs": [str(path), str(out / "sweep.meta.json")]}


def cmd_summarize(args) -> dict:
    results = sweep.read_results(args.results)
    rows = sweep.summary_table(results, reducer=args.reducer)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "summary.csv"
    sweep.write_summary(rows, path)
    return {"algorithms": len(rows), "outputs": [str(path)]}


def cmd_matrix(args) -> dict:
    results = sweep.read_results(args.results)
    metrics = sweep.METRIC_NAMES if args.metric == "all" else (args.metric,)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    shape = None
    for m in metrics:
        pm = perfmatrix.build_matrix(results, m)
        path = out / f"matrix_{m}.csv"
        perfmatrix.write_matrix(pm, path)
        paths.append(str(path))
        shape = list(pm.shape)
    return {"shape": shape, "outputs": paths}


def cmd_ccr(args) -> dict:
    pm = perfmatrix.read_matrix(args.matrix)
    if not pm.mask.all():
        raise perfmatrix.MatrixError("ccr needs a fully observed matrix; run `complete` first")
    value = perfmatrix.ccr(pm.P, args.j)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    curve = perfmatrix.ccr_curve(pm.P)
    _write_json(out / "ccr.json", {"j": args.j, "ccr": value, "curve": curve.tolist()})
    return {"j": args.j, "ccr": value, "outputs": [str(out / "ccr.json")]}


def _drop_empty(pm: perfmatrix.PerformanceMatrix):
    rows = np.flatnonzero(pm.mask.any(axis=1))
    cols = np.flatnonzero(pm.mask.any(axis=0))
    dropped = {"rows": [pm.row_names[i] for i in range(pm.shape[0]) if i not in set(rows)],
               "cols": [pm.col_names[j] for j in range(pm.shape[1]) if j not in set(cols)]}
    return pm.submatrix(rows, cols), dropped


def cmd_complete(args) -> dict:
    pm = perfmatrix.read_matrix(args.matrix, metric=args.metric)
    pm, dropped = _drop_empty(pm)
    if min(pm.shape) == 0:
        raise perfmatrix.MatrixError("matrix has no observed entries")
    rank = min(args.rank, *pm.shape)
    if rank != args.rank:
        logger.warning("rank %d exceeds matrix dimensions %s; using %d", args.rank, pm.shape, rank)
    report = perfmatrix.completion_report(pm.P, args.mr, r=rank, seeds=range(args.seed, args.seed + args.seeds),
                                          metric=args.metric, iters=args.iters)
    report.update({"requested_rank": args.rank, "shape": list(pm.shape), "dropped": dropped,
                   "observed_fraction": float(pm.mask.mean())})
    fact = perfmatrix.complete(pm.P, pm.mask, r=rank, iters=args.iters)
    filled = np.where(pm.mask, pm.P, perfmatrix.clamp(fact.reconstruction, args.metric))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.matrix).stem
    matrix_path = out / f"{stem}_completed.csv"
    perfmatrix.write_matrix(perfmatrix.PerformanceMatrix(filled, pm.row_names, pm.col_names, args.metric),
                            matrix_path)
    _write_json(out / "completion.json", report)
    return {"mape_mean": report["mape_mean"], "rank": rank,
            "outputs": [str(out / "completion.json"), str(matrix_path)]}


def cmd_metafeat(args) -> dict:
    datasets = _load_datasets(args.data, not args.raw, args.seed)
    vectors = [meta_vector(d, seed=args.seed) for d in datasets]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_meta(vectors, [d.name for d in datasets], out / "meta.csv", out / "meta_manifest.json")
    return {"datasets": len(datasets), "dimension": len(vectors[0].values),
            "outputs": [str(out / "meta.csv"), str(out / "meta_manifest.json")]}


def cmd_select(args) -> dict:
    paths = [p.strip() for p in args.matrices.split(",")]
    if len(paths) != 3:
        raise UsageError("--matrices expects three comma-separated files (acc,nmi,ari)")
    names, features, Z = read_meta(args.meta)
    mats = [perfmatrix.read_matrix(p, metric=m) for p, m in zip(paths, sweep.METRIC_NAMES)]
    cols = mats[0].col_names
    if any(m.col_names != cols for m in mats[1:]):
        raise perfmatrix.MatrixError("the three matrices disagree on their configurations")
    rows = mats[0].row_names
    if any(m.row_names != rows for m in mats[1:]):
        raise perfmatrix.MatrixError("the three matrices disagree on their datasets")
    index = {n: i for i, n in enumerate(names)}
    absent = [r for r in rows if r not in index]
    if absent:
        raise select.SelectionError(f"no meta-features for datasets: {', '.join(absent)}")
    Zm = Z[[index[r] for r in rows]]
    report = select.cross_validate(Zm, mats[0].P, mats[1].P, mats[2].P, folds=args.folds,
                                   seed=args.seed, trees=args.trees, col_names=cols,
                                   feature_names=features)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    select.write_cv_table(report, out / "cv_table.csv")
    _write_json(out / "cv_detail.json", {
        "folds": [[rows[i] for i in f] for f in report.folds],
        "per_fold": report.per_fold,
        "table": report.table,
        "choices": {m: [{"dataset": rows[o.dataset], "config_id": o.config_id, "realized": o.realized}
                        for o in sorted(report.outcomes[m], key=lambda o: o.dataset)]
                    for m in sweep.METRIC_NAMES},
    })
    model = select.fit(Zm, mats[0].P, trees=args.trees, seed=args.seed, feature_names=features,
                       target_names=cols, metric="acc")
    (out / "selector_acc.json").write_text(model.to_json() + "\n", encoding="utf-8")
    return {"strategies": report.strategies,
            "regressor_acc": report.table["regressor"]["acc"], "eub_acc": report.table["EUB"]["acc"],
            "outputs": [str(out / n) for n in ("cv_table.csv", "cv_detail.json", "selector_acc.json")]}


def _group_of(d: Dataset, by: str) -> str:
    if by == "none":
        return "all"
    tag = group_assign(d, imbalance_stats(d.y)) if d.y is not None else None
    if by == "modality":
        return d.modality
    if tag is None:
        raise DataError(f"{d.name}: grouping by {by} needs labels")
    return tag.dim_group if by == "dim" else tag.ir_group


def cmd_report(args) -> dict:
    results = sweep.read_results(args.results)
    if args.group_by != "none" and args.data is None:
        raise UsageError("--group-by needs --data to read dataset properties")
    groups: dict = {}
    if args.data is not None:
        for d in load_dir(args.data):
            groups[d.name] = _group_of(d, args.group_by)
    names = sorted({r.dataset for r in results})
    for n in names:
        groups.setdefault(n, "all" if args.group_by == "none" else "unknown")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary_path = out / f"report_{args.group_by}.csv"
    ranks_path = out / f"ranks_{args.group_by}.csv"
    with summary_path.open("w", newline="", encoding="utf-8") as fs, \
            ranks_path.open("w", newline="", encoding="utf-8") as fr:
        ws = csv.writer(fs, lineterminator="\n")
        wr = csv.writer(fr, lineterminator="\n")
        ws.writerow(["group", "n_datasets"] + sweep.SUMMARY_COLUMNS)
        wr.writerow(["group", "metric", "algorithm", "avg_rank", "p_vs_top", "degenerate"])
        for g in sorted(set(groups[n] for n in names)):
            members = {n for n in names if groups[n] == g}
            sub = [r for r in results if r.dataset in members]
            for row in sweep.summary_table(sub, reducer=args.reducer):
                ws.writerow([g, len(members), row["algorithm"]]
                            + [f"{row[c]:.4f}" for c in sweep.SUMMARY_COLUMNS[1:]])
            for m in sweep.METRIC_NAMES:
                best = perfmatrix.best_per_algorithm(perfmatrix.build_matrix(sub, m))
                keep = np.flatnonzero(best.mask.all(axis=0))
                if len(keep) < 2 or best.shape[0] < 2:
                    logger.warning("group %s metric %s: too few datasets or fully observed algorithms to rank", g, m)
                    continue
                test = perfmatrix.ranks_and_tests(best.P[:, keep], [best.col_names[j] for j in keep])
                top = int(np.argmin(test.avg_ranks))
                for j, a in enumerate(test.names):
                    p = test.pvalues[top, j] if j != top else math.nan
                    wr.writerow([g, m, a, f"{test.avg_ranks[j]:.4f}",
                                 "" if math.isnan(p) else repr(float(p)), int(test.degenerate[top, j])])
    return {"groups": len(set(groups.values())), "outputs": [str(summary_path), str(ranks_path)]}


# ---------------------------------------------------------------- parser

def _mr(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("mr must be in (0,1)") from None
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError("mr must be in (0,1)")
    return v


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


def build_parser(seed_default: int) -> _Parser:
    p = _Parser(prog="clubench", description="Clustering benchmark engine.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_text):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int, default=seed_default)
        return sp

    sp = add("demo", "write synthetic datasets")
    sp.add_argument("--n-datasets", type=_positive, default=12)
    sp.add_argument("--n", type=_positive, default=200, help="points per dataset")
    sp.set_defaults(func=cmd_demo)

    sp = add("sweep", "run the configuration sweep")
    sp.add_argument("--data", required=True)
    sp.add_argument("--algos", default="all")
    sp.add_argument("--repeats", type=_positive, default=5)
    sp.add_argument("--workers", type=_positive, default=1)
    sp.add_argument("--grid", action="append", help="grid override JSON (repeatable)")
    sp.add_argument("--reducer", choices=("mean", "median"), default="mean")
    sp.add_argument("--raw", action="store_true", help="skip z-scoring")
    sp.set_defaults(func=cmd_sweep)

    sp = add("summarize", "default/best/delta table per algorithm")
    sp.add_argument("--results", required=True)
    sp.add_argument("--reducer", choices=("mean", "median"), default="mean")
    sp.set_defaults(func=cmd_summarize)

    sp = add("matrix", "build performance matrices")
    sp.add_argument("--results", required=True)
    sp.add_argument("--metric", choices=("acc", "nmi", "ari", "all"), default="acc")
    sp.set_defaults(func=cmd_matrix)

    sp = add("ccr", "cumulative contribution ratio of the singular values")
    sp.add_argument("--matrix", required=True)
    sp.add_argument("--j", type=_positive, default=60)
    sp.set_defaults(func=cmd_ccr)

    sp = add("complete", "low-rank completion study")
    sp.add_argument("--matrix", required=True)
    sp.add_argument("--mr", type=_mr, default=0.5)
    sp.add_argument("--rank", type=_positive, default=60)
    sp.add_argument("--seeds", type=_positive, default=5)
    sp.add_argument("--iters", type=_positive, default=300)
    sp.add_argument("--metric", choices=("acc", "nmi", "ari"), default="acc")
    sp.set_defaults(func=cmd_complete)

    sp = add("metafeat", "extract meta-features")
    sp.add_argument("--data", required=True)
    sp.add_argument("--raw", action="store_true", help="skip z-scoring")
    sp.set_defaults(func=cmd_metafeat)

    sp = add("select", "cross-validated configuration selection")
    sp.add_argument("--meta", required=True)
    sp.add_argument("--matrices", required=True, help="acc,nmi,ari matrix CSVs")
    sp.add_argument("--folds", type=_positive, default=5)
    sp.add_argument("--trees", type=_positive, default=200)
    sp.set_defaults(func=cmd_select)

    sp = add("report", "grouped summary and rank tables")
    sp.add_argument("--results", required=True)
    sp.add_argument("--data")
    sp.add_argument("--group-by", choices=("modality", "dim", "ir", "none"), default="none")
    sp.add_argument("--reducer", choices=("mean", "median"), default="mean")
    sp.set_defaults(func=cmd_report)
    return p


def _status(doc) -> None:
    print(json.dumps(doc, sort_keys=True, default=str), flush=True)


def main(argv=None) -> int:
    argv = [os.fspath(a) for a in (sys.argv[1:] if argv is None else argv)]
    command = argv[0] if argv else None
    try:
        parser = build_parser(_default_seed())
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        _status({"command": command, "status": "usage_error", "message": str(exc).splitlines()[0]})
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        doc = args.func(args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        _status({"command": args.command, "status": "usage_error", "message": str(exc)})
        return 1
    except (OSError, ValueError, ConfigError, RuntimeError) as exc:
        print(f"clubench {args.command}: {exc}", file=sys.stderr)
        _status({"command": args.command, "status": "error", "message": str(exc)})
        return 2
    _status({"command": args.command, "status": "ok", **doc})
    return 0


if __name__ == "__main__":
    sys.exit(main())
