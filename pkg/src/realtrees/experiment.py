"""Replicated experiment runs, result files and aggregation."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import tempfile
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import __version__
from .alloop import LoopConfig, RunHistory, run_active_learning
from .data import Dataset, SyntheticConfig, binarize, gen_parity, gen_xor_mixture, load_csv, split_dataset
from .errors import ConfigError, TruncationTooShort
from .kernels import backend
from .metrics import accuracy_trace, aggregate
from .rashomon import DEFAULT_CAP, SearchConfig, optimal_tree
from .strategy import STRATEGY_NAMES

log = logging.getLogger(__name__)

DATASET_KEYS = {
    "xor": {"kind", "name", "n", "p", "alpha", "phi", "seed"},
    "parity": {"kind", "name", "n", "noise_dims", "seed"},
    "csv": {"kind", "name", "path", "label_column", "max_thresholds"},
}

ACCURACY_HEADER = ("dataset", "strategy", "seed", "iteration", "accuracy")
RASHOMON_HEADER = ("dataset", "strategy", "seed", "iteration", "set_size", "ecs")
QUERIES_HEADER = ("dataset", "strategy", "seed", "iteration", "queried_index", "score")
AGGREGATE_HEADER = ("dataset", "strategy", "auc_k", "rho", "nrel_70", "nrel_80", "nrel_90")
RUNTIME_HEADER = ("dataset", "strategy", "seed", "seconds")
STRUCTURE_HEADER = ("dataset", "strategy", "seed", "iteration", "selector_objective",
                    "oracle_agreement", "tree_edit_distance", "predictor")
FAILURES_HEADER = ("dataset", "strategy", "seed", "error", "message")


# ------------------------------------------------------------------ config


def dataset_name(spec: dict) -> str:
    if "name" in spec:
        return str(spec["name"])
    kind = spec["kind"]
    if kind == "xor":
        return f"xor_a{spec.get('alpha', 0.0):g}_phi{spec.get('phi', 0.0):g}"
    if kind == "parity":
        return f"parity_{spec.get('noise_dims', 0)}"
    return Path(spec["path"]).stem


def _check_dataset_spec(spec) -> dict:
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("dataset spec must be an object with a 'kind'")
    kind = spec["kind"]
    if kind not in DATASET_KEYS:
        raise ConfigError(f"unknown dataset kind {kind!r}; valid kinds: {', '.join(DATASET_KEYS)}")
    extra = set(spec) - DATASET_KEYS[kind]
    if extra:
        raise ConfigError(f"unknown keys for {kind} dataset: {', '.join(sorted(extra))}")
    if kind == "csv" and not {"path", "label_column"} <= set(spec):
        raise ConfigError("csv dataset needs 'path' and 'label_column'")
    return dict(spec)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce a batch of runs.

    ``seeds`` may be given as a count ``k`` (meaning ``0..k-1``) or a list;
    it is stored as a tuple. ``budget=None`` means ``min(|pool|, 300)``.
    """

    datasets: tuple
    strategies: tuple
    seeds: tuple = tuple(range(25))
    budget: int | None = None
    output_dir: str = "results"
    K: float = 0.7
    test_fraction: float = 0.2
    pilot_size: int = 20
    predictor_depth: int = 5
    predictor_lambda: float = 0.001
    set_size_cap: int = DEFAULT_CAP
    n_trees: int = 100
    track_oracle: bool = False

    def __post_init__(self):
        if not self.strategies:
            raise ConfigError("at least one strategy is required")
        bad = [s for s in self.strategies if s not in STRATEGY_NAMES]
        if bad:
            raise ConfigError(f"unknown strategy {bad[0]!r}; valid names: {', '.join(STRATEGY_NAMES)}")
        if len(set(self.strategies)) != len(self.strategies):
            raise ConfigError("strategies must be distinct")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be distinct")
        if not self.datasets:
            raise ConfigError("at least one dataset is required")
        names = [dataset_name(d) for d in self.datasets]
        if len(set(names)) != len(names):
            raise ConfigError("dataset names must be distinct; set 'name' explicitly")
        if self.budget is not None and self.budget < 0:
            raise ConfigError("budget must be non-negative")
        if not 0 < self.K <= 1:
            raise ConfigError("K must lie in (0, 1]")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)} | {"dataset"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(extra))}")
        d = dict(d)
        if "dataset" in d:
            if "datasets" in d:
                raise ConfigError("give either 'dataset' or 'datasets', not both")
            d["datasets"] = [d.pop("dataset")]
        if "datasets" not in d or "strategies" not in d:
            raise ConfigError("config needs 'dataset(s)' and 'strategies'")
        ds = d["datasets"]
        d["datasets"] = tuple(_check_dataset_spec(s) for s in (ds if isinstance(ds, list) else [ds]))
        d["strategies"] = tuple(d["strategies"])
        seeds = d.get("seeds", 25)
        if isinstance(seeds, bool) or not isinstance(seeds, (int, list)):
            raise ConfigError("seeds must be a count or a list of integers")
        d["seeds"] = tuple(range(seeds)) if isinstance(seeds, int) else tuple(int(s) for s in seeds)
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                return cls.from_dict(json.load(fh))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["datasets"] = [dict(s) for s in self.datasets]
        d["strategies"] = list(self.strategies)
        d["seeds"] = list(self.seeds)
        return d


# ---------------------------------------------------------------- datasets


@lru_cache(maxsize=8)
def _load_cached(spec_json: str) -> Dataset:
    spec = json.loads(spec_json)
    name = dataset_name(spec)
    kind = spec["kind"]
    if kind == "xor":
        cfg = SyntheticConfig(n=spec.get("n", 500), p=spec.get("p", 20), alpha=spec.get("alpha", 0.0),
                              phi=spec.get("phi", 0.0), seed=spec.get("seed", 0))
        return gen_xor_mixture(cfg, name=name)
    if kind == "parity":
        return gen_parity(spec.get("n", 100), spec.get("noise_dims", 0), spec.get("seed", 0), name=name)
    raw = load_csv(spec["path"], spec["label_column"])
    ds, _ = binarize(raw, spec.get("max_thresholds", 16), name=name)
    return ds


def load_experiment_dataset(spec: dict) -> Dataset:
    return _load_cached(json.dumps(spec, sort_keys=True))


@lru_cache(maxsize=8)
def _oracle_cached(spec_json: str, depth: int, lam: float):
    ds = _load_cached(spec_json)
    return optimal_tree(ds, SearchConfig(depth, lam))[0]


def _crc(text: str) -> int:
    return zlib.crc32(text.encode())


def split_seed(seed: int, dataset: str) -> tuple:
    return (int(seed), _crc(dataset))


def strategy_seed(seed: int, dataset: str, strategy: str) -> tuple:
    return (int(seed), _crc(dataset), _crc(strategy))


# -------------------------------------------------------------------- runs


@dataclass
class RunRecord:
    dataset: str
    strategy: str
    seed: int
    seconds: float
    history: RunHistory | None = None
    error: str | None = None
    message: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def run_one(cfg: ExperimentConfig, dataset_index: int, strategy: str, seed: int) -> RunRecord:
    """One (dataset, strategy, seed) replicate; errors are captured, not raised."""
    spec = cfg.datasets[dataset_index]
    name = dataset_name(spec)
    start = time.perf_counter()
    try:
        ds = load_experiment_dataset(spec)
        split = split_dataset(ds, cfg.test_fraction, cfg.pilot_size, seed=split_seed(seed, name))
        budget = min(len(split.pool_indices), 300) if cfg.budget is None else cfg.budget
        oracle_tree = None
        if cfg.track_oracle:
            oracle_tree = _oracle_cached(json.dumps(spec, sort_keys=True), cfg.predictor_depth,
                                         cfg.predictor_lambda)
        loop = LoopConfig(budget=budget, strategy=strategy, predictor_depth=cfg.predictor_depth,
                          predictor_lambda=cfg.predictor_lambda, seed=strategy_seed(seed, name, strategy),
                          set_size_cap=cfg.set_size_cap, n_trees=cfg.n_trees)
        hist = run_active_learning(ds, split, loop, oracle_tree=oracle_tree)
        return RunRecord(name, strategy, seed, time.perf_counter() - start, hist)
    except Exception as exc:  # a failed replicate must not take its siblings down
        log.warning("run %s/%s/%s failed: %s", name, strategy, seed, exc)
        return RunRecord(name, strategy, seed, time.perf_counter() - start, None,
                         type(exc).__name__, str(exc))


def _run_task(args) -> RunRecord:
    return run_one(*args)


def resolve_jobs(jobs: int | None) -> int:
    env = os.environ.get("REALTREES_JOBS")
    if env:
        try:
            jobs = int(env)
        except ValueError:
            raise ConfigError(f"REALTREES_JOBS must be an integer, got {env!r}") from None
    return max(1, int(jobs or 1))


def run_experiment(cfg: ExperimentConfig, jobs: int | None = 1, write: bool = True) -> list[RunRecord]:
    """Run every (dataset, strategy, seed) replicate and optionally write results.

    Records come back in (dataset, strategy, seed) config order whatever the
    scheduling, so written files do not depend on ``jobs``.
    """
    tasks = [(cfg, di, s, seed) for di in range(len(cfg.datasets)) for s in cfg.strategies for seed in cfg.seeds]
    jobs = resolve_jobs(jobs)
    wall = time.perf_counter()
    if jobs == 1 or len(tasks) == 1:
        records = [_run_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            records = list(pool.map(_run_task, tasks))
    wall = time.perf_counter() - wall
    if write:
        write_results(cfg, records, wall_seconds=wall)
    return records


# ------------------------------------------------------------------ output


def fmt(value) -> str:
    """17 significant digits for floats; empty for missing values."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        return "nan"
    return format(value, ".17g")


def atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if not isinstance(v, str) else v for v in row])
    return buf.getvalue()


def _history_rows(records):
    acc, ras, qry, struct = [], [], [], []
    for r in records:
        if not r.ok:
            continue
        h = r.history
        key = (r.dataset, r.strategy, r.seed)
        for t, a in enumerate(h.accuracy):
            acc.append(key + (t, a))
            ras.append(key + (t, h.set_size[t], h.ecs[t]))
            agree = h.oracle_agreement[t] if h.oracle_agreement else None
            ted = h.tree_edit_distance[t] if h.tree_edit_distance else None
            struct.append(key + (t, h.selector_objective[t], agree, ted, h.predictors[t]))
        for t, (q, s) in enumerate(zip(h.queried, h.scores)):
            qry.append(key + (t, q, s))
    return acc, ras, qry, struct


def aggregate_records(records, K: float = 0.7) -> list[tuple]:
    """Aggregate rows ``(dataset, strategy, auc_k, rho, nrel_70, nrel_80, nrel_90)``."""
    by_ds: dict = {}
    for r in records:
        if r.ok:
            by_ds.setdefault(r.dataset, {}).setdefault(r.strategy, []).append(accuracy_trace(r.history.accuracy))
    rows = []
    for name, traces in by_ds.items():
        try:
            summary = aggregate(traces, K)
        except (TruncationTooShort, ZeroDivisionError) as exc:
            log.warning("no aggregate for %s: %s", name, exc)
            continue
        for row in summary:
            rows.append((name, row["strategy"], row["auc_k"], row["rho"],
                         row["nrel_70"], row["nrel_80"], row["nrel_90"]))
    return rows


def write_results(cfg: ExperimentConfig, records, wall_seconds: float | None = None, out=None) -> Path:
    out = Path(out or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    acc, ras, qry, struct = _history_rows(records)
    atomic_write(out / "accuracy_history.csv", _csv_text(ACCURACY_HEADER, acc))
    atomic_write(out / "rashomon_history.csv", _csv_text(RASHOMON_HEADER, ras))
    atomic_write(out / "queries.csv", _csv_text(QUERIES_HEADER, qry))
    atomic_write(out / "structure_history.csv", _csv_text(STRUCTURE_HEADER, struct))
    atomic_write(out / "runtime.csv", _csv_text(RUNTIME_HEADER, [(r.dataset, r.strategy, r.seed, r.seconds)
                                                                for r in records]))
    failed = [(r.dataset, r.strategy, r.seed, r.error, r.message) for r in records if not r.ok]
    atomic_write(out / "failures.csv", _csv_text(FAILURES_HEADER, failed))
    for r in records:
        if r.ok:
            doc = {"dataset": r.dataset, "seed": r.seed, **r.history.to_dict()}
            atomic_write(out / "runs" / f"{r.dataset}__{r.strategy}__{r.seed}.json",
                         json.dumps(doc, indent=1, sort_keys=True) + "\n")
    # aggregates only once every run has settled
    atomic_write(out / "aggregate.csv", _csv_text(AGGREGATE_HEADER, aggregate_records(records, cfg.K)))
    manifest = {
        "config": cfg.to_dict(),
        "version": __version__,
        "backend": backend().NAME,
        "wall_seconds": wall_seconds,
        "runs": [{"dataset": r.dataset, "strategy": r.strategy, "seed": r.seed, "seconds": r.seconds,
                  "ok": r.ok} for r in records],
    }
    atomic_write(out / "manifest.json", json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return out


def load_records(result_dir) -> tuple[ExperimentConfig, list[RunRecord]]:
    """Rebuild the config and successful run records from a result directory."""
    result_dir = Path(result_dir)
    with open(result_dir / "manifest.json") as fh:
        manifest = json.load(fh)
    cfg = ExperimentConfig.from_dict(manifest["config"])
    records = []
    for run in manifest["runs"]:
        path = result_dir / "runs" / f"{run['dataset']}__{run['strategy']}__{run['seed']}.json"
        hist = None
        if run["ok"]:
            with open(path) as fh:
                hist = RunHistory.from_dict(json.load(fh))
        records.append(RunRecord(run["dataset"], run["strategy"], run["seed"], run["seconds"], hist,
                                 None if run["ok"] else "failed"))
    return cfg, records


def report(result_dir) -> Path:
    """Recompute aggregate.csv from the stored per-run histories."""
    cfg, records = load_records(result_dir)
    rows = aggregate_records(records, cfg.K)
    path = Path(result_dir) / "aggregate.csv"
    atomic_write(path, _csv_text(AGGREGATE_HEADER, rows))
    return path
