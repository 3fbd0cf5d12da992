"""Dataset ingestion, binarization, synthetic generators and splitting."""
from __future__ import annotations

import csv
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    ConstantLabel,
    EmptyFile,
    MissingLabelColumn,
    RaggedRow,
    StratificationInfeasible,
)

CACHE_MAGIC = b"RLTD1"


@dataclass(frozen=True)
class RawDataset:
    """Parsed delimited file before binarization.

    ``rows`` hold the feature values only (label column removed), already
    converted to ``float`` for numeric columns and kept as ``str`` otherwise.
    """

    rows: list[list]
    labels: list[str]
    label_column: str
    feature_names: list[str]
    numeric: list[bool]

    def __len__(self) -> int:
        return len(self.rows)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Binary feature matrix with integer-coded labels.

    ``classes`` is the label set of the *full* dataset; label codes index it.
    Subsets keep the parent's label set even if some classes are absent.
    """

    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...]
    classes: tuple[str, ...] = ("0", "1")
    name: str = "dataset"

    def __post_init__(self):
        X = np.ascontiguousarray(self.X, dtype=np.uint8)
        y = np.ascontiguousarray(self.y, dtype=np.int64)
        if X.ndim != 2:
            raise ValueError("X must be two-dimensional")
        if y.shape != (X.shape[0],):
            raise ValueError("y must have one label per row")
        if X.shape[1] < 1:
            raise ValueError("dataset needs at least one feature")
        if X.size and X.max() > 1:
            raise ValueError("X must be binary")
        if len(self.classes) < 2:
            raise ValueError("label set needs at least two classes")
        if y.size and (y.min() < 0 or y.max() >= len(self.classes)):
            raise ValueError("label code outside the label set")
        if len(self.feature_names) != X.shape[1]:
            raise ValueError("feature_names length does not match X")
        X.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "classes", tuple(str(c) for c in self.classes))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.X[idx], self.y[idx], self.feature_names, self.classes, self.name)

    def with_labels(self, y) -> "Dataset":
        return Dataset(self.X, y, self.feature_names, self.classes, self.name)


# ---------------------------------------------------------------- CSV ingest


def _parse_float(value: str):
    try:
        return float(value)
    except ValueError:
        return None


def load_csv(path, label_column: str) -> RawDataset:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyFile(f"{path} is empty")
        header = [h.strip() for h in header]
        if label_column not in header:
            raise MissingLabelColumn(f"column {label_column!r} not in header {header}")
        records = []
        for line_no, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise RaggedRow(line_no, len(header), len(rec))
            records.append([v.strip() for v in rec])
    if not records:
        raise EmptyFile(f"{path} has a header but no data rows")

    li = header.index(label_column)
    feat_idx = [j for j in range(len(header)) if j != li]
    numeric = []
    for j in feat_idx:
        numeric.append(all(_parse_float(r[j]) is not None for r in records))
    rows = []
    for r in records:
        rows.append([float(r[j]) if num else r[j] for j, num in zip(feat_idx, numeric)])
    return RawDataset(
        rows=rows,
        labels=[r[li] for r in records],
        label_column=label_column,
        feature_names=[header[j] for j in feat_idx],
        numeric=numeric,
    )


# -------------------------------------------------------------- binarization


@dataclass(frozen=True)
class FeatureRule:
    source: str
    kind: str  # "categorical" or "numeric"
    levels: tuple = ()  # categorical levels, one column each
    thresholds: tuple = ()  # numeric cut points, column means value <= t

    def columns(self) -> list[str]:
        if self.kind == "categorical":
            return [f"{self.source}={lv}" for lv in self.levels]
        return [f"{self.source}<={t:g}" for t in self.thresholds]


@dataclass(frozen=True)
class BinarizationMap:
    rules: tuple[FeatureRule, ...]
    classes: tuple[str, ...]

    @property
    def feature_names(self) -> list[str]:
        return [c for r in self.rules for c in r.columns()]

    def apply(self, raw: RawDataset) -> np.ndarray:
        """Recreate the binary matrix for ``raw`` from the stored rules."""
        cols = []
        src = {name: j for j, name in enumerate(raw.feature_names)}
        for rule in self.rules:
            j = src[rule.source]
            values = [row[j] for row in raw.rows]
            if rule.kind == "categorical":
                for lv in rule.levels:
                    cols.append([v == lv for v in values])
            else:
                arr = np.asarray(values, dtype=float)
                for t in rule.thresholds:
                    cols.append(arr <= t)
        return np.asarray(cols, dtype=np.uint8).T.reshape(len(raw.rows), len(cols))


def _label_order(labels: Sequence[str]) -> list[str]:
    uniq = set(labels)
    if all(_parse_float(v) is not None for v in uniq):
        return sorted(uniq, key=float)
    return sorted(uniq)


def binarize(raw: RawDataset, max_thresholds_per_feature: int = 16, name: str = "dataset"):
    """Turn a raw table into a binary :class:`Dataset`.

    Categorical columns are one-hot encoded. Numeric columns get indicator
    columns ``x <= t`` at midpoints between consecutive distinct values; when
    there are more midpoints than ``max_thresholds_per_feature`` an evenly
    spaced quantile subsample of them is kept.
    """
    if len(raw) == 0:
        raise EmptyFile("no rows to binarize")
    classes = _label_order(raw.labels)
    if len(classes) < 2:
        raise ConstantLabel(f"label column {raw.label_column!r} has a single value")

    rules = []
    for j, (fname, num) in enumerate(zip(raw.feature_names, raw.numeric)):
        values = [row[j] for row in raw.rows]
        if not num:
            rules.append(FeatureRule(fname, "categorical", levels=tuple(sorted(set(values)))))
            continue
        u = np.unique(np.asarray(values, dtype=float))
        mids = (u[:-1] + u[1:]) / 2.0
        if len(mids) > max_thresholds_per_feature:
            pick = np.unique(
                np.round(np.linspace(0, len(mids) - 1, max_thresholds_per_feature)).astype(int)
            )
            mids = mids[pick]
        if len(mids):
            rules.append(FeatureRule(fname, "numeric", thresholds=tuple(float(t) for t in mids)))

    bmap = BinarizationMap(tuple(rules), tuple(classes))
    X = bmap.apply(raw)
    code = {c: i for i, c in enumerate(classes)}
    y = np.array([code[v] for v in raw.labels], dtype=np.int64)
    return Dataset(X, y, bmap.feature_names, tuple(classes), name), bmap


# ------------------------------------------------------------------ synthetic


@dataclass(frozen=True)
class SyntheticConfig:
    n: int = 500
    p: int = 20
    alpha: float = 0.0
    phi: float = 0.0
    seed: int = 0
    linear_weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if not 0.0 <= self.phi < 0.5:
            raise ValueError("phi must lie in [0, 0.5)")
        if self.linear_weights is not None and len(self.linear_weights) != self.p:
            raise ValueError("linear_weights must have length p")


def gen_xor_mixture(cfg: SyntheticConfig, name: str = "xor") -> Dataset:
    """XOR on the first two bits mixed with a linear-threshold labeler.

    Each row takes the linear label with probability ``alpha`` and the XOR
    label otherwise. The linear score uses the raw 0/1 features. When
    ``cfg.phi > 0`` symmetric label noise is applied afterwards.
    """
    if cfg.p < 2:
        raise ValueError("XOR mixture needs p >= 2")
    rng = np.random.default_rng(cfg.seed)
    X = rng.integers(0, 2, size=(cfg.n, cfg.p), dtype=np.uint8)
    if cfg.linear_weights is None:
        w = rng.standard_normal(cfg.p)
    else:
        w = np.asarray(cfg.linear_weights, dtype=float)
    use_linear = rng.random(cfg.n) < cfg.alpha
    y_tree = X[:, 0] ^ X[:, 1]
    y_linear = (X.astype(float) @ w > 0).astype(np.uint8)
    y = np.where(use_linear, y_linear, y_tree).astype(np.int64)
    names = tuple(f"x{j}" for j in range(cfg.p))
    ds = Dataset(X, y, names, ("0", "1"), name)
    if cfg.phi > 0:
        ds = apply_label_noise(ds, cfg.phi, seed=(cfg.seed, 1))
    return ds


def apply_label_noise(ds: Dataset, phi: float, seed) -> Dataset:
    """Flip exactly ``floor(phi * n)`` labels chosen without replacement."""
    if not 0.0 <= phi < 0.5:
        raise ValueError("phi must lie in [0, 0.5)")
    if ds.n_classes != 2:
        raise ValueError("symmetric flipping needs a binary label set")
    k = int(math.floor(phi * ds.n + 1e-9))
    if k == 0:
        return ds
    rng = np.random.default_rng(seed)
    idx = rng.choice(ds.n, size=k, replace=False)
    y = ds.y.copy()
    y[idx] = 1 - y[idx]
    return ds.with_labels(y)


def gen_parity(n: int, noise_dims: int, seed, name: str = "parity") -> Dataset:
    """Three-bit parity core (label 1 when the bit sum is even) plus noise bits."""
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 2, size=(n, 3 + noise_dims), dtype=np.uint8)
    y = (X[:, :3].sum(axis=1) % 2 == 0).astype(np.int64)
    return Dataset(X, y, tuple(f"x{j}" for j in range(X.shape[1])), ("0", "1"), name)


# ------------------------------------------------------------------ splitting


@dataclass(frozen=True)
class SplitSpec:
    test_indices: np.ndarray
    pool_indices: np.ndarray  # seeded permutation order, not sorted
    initial_labeled_indices: np.ndarray
    test_fraction: float = 0.20
    pilot_size: int = 20

    def check(self, n: int) -> None:
        parts = [self.test_indices, self.pool_indices, self.initial_labeled_indices]
        allidx = np.concatenate(parts)
        if len(allidx) != n or len(np.unique(allidx)) != n:
            raise AssertionError("split does not partition the dataset")


def _largest_remainder(counts: np.ndarray, total: int) -> np.ndarray:
    exact = counts * total / counts.sum()
    base = np.floor(exact).astype(int)
    rem = exact - base
    short = total - base.sum()
    # stable sort keeps label order for equal remainders
    order = np.argsort(-rem, kind="stable")
    base[order[:short]] += 1
    return base


def split_dataset(ds: Dataset, test_fraction: float = 0.20, pilot_size: int = 20, seed=0) -> SplitSpec:
    rng = np.random.default_rng(seed)
    n = ds.n
    perm = rng.permutation(n)
    n_test = int(round(test_fraction * n))
    test = np.sort(perm[:n_test])
    work = perm[n_test:]
    if pilot_size > len(work):
        raise StratificationInfeasible("pilot larger than the working pool")

    labels = ds.y[work]
    present = np.unique(labels)
    if len(present) < 2:
        raise StratificationInfeasible("working pool holds a single class")
    counts = np.array([(labels == c).sum() for c in present])
    quota = _largest_remainder(counts, pilot_size)
    if (quota == 0).any():
        raise StratificationInfeasible(f"pilot of {pilot_size} cannot include every class")

    pilot = []
    for c, q in zip(present, quota):
        members = work[labels == c]
        pilot.extend(rng.choice(members, size=q, replace=False).tolist())
    pilot = np.sort(np.array(pilot, dtype=np.int64))
    # pool keeps the seeded permutation order, so "lowest pool index" tie-breaks
    # land on a different, seed-dependent row in every replicate
    pool = work[~np.isin(work, pilot)]
    return SplitSpec(test, pool, pilot, test_fraction, pilot_size)


# ----------------------------------------------------------------- disk cache


def save_dataset(path, ds: Dataset) -> None:
    header = json.dumps(
        {
            "n": ds.n,
            "p": ds.p,
            "feature_names": list(ds.feature_names),
            "classes": list(ds.classes),
            "name": ds.name,
        }
    ).encode()
    with open(path, "wb") as fh:
        fh.write(CACHE_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        # column-major so each feature's bits are contiguous
        fh.write(np.packbits(ds.X.T, axis=1).tobytes())
        fh.write(ds.y.astype("<i4").tobytes())


def load_dataset(path) -> Dataset:
    with open(path, "rb") as fh:
        if fh.read(len(CACHE_MAGIC)) != CACHE_MAGIC:
            raise ValueError(f"{path} is not a dataset cache file")
        (hlen,) = struct.unpack("<I", fh.read(4))
        meta = json.loads(fh.read(hlen))
        n, p = meta["n"], meta["p"]
        row_bytes = (n + 7) // 8
        bits = np.frombuffer(fh.read(row_bytes * p), dtype=np.uint8).reshape(p, row_bytes)
        X = np.unpackbits(bits, axis=1, count=n).T
        y = np.frombuffer(fh.read(4 * n), dtype="<i4").astype(np.int64)
    return Dataset(X, y, tuple(meta["feature_names"]), tuple(meta["classes"]), meta["name"])
