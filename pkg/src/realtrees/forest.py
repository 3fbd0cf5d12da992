"""Bootstrap random forests of greedy Gini trees (committee for QBC-RF)."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import DegenerateLabels
from .tree import Leaf, Node, TreeBatch


@dataclass(frozen=True)
class ForestConfig:
    """Random forest settings.

    Parameters
    ----------
    n_trees : int
        Committee size.
    subset_mode : str or int
        ``"sqrt"`` draws ``ceil(sqrt(p))`` candidate features per node,
        ``"all"`` uses every feature, an int ``k`` draws exactly ``k``.
    max_depth : int
        Depth bound of every tree.
    seed : int
        Base seed; tree ``i`` uses the stream ``(seed, i)``.
    """

    n_trees: int = 100
    subset_mode: str | int = "sqrt"
    max_depth: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 2:
            raise ValueError("a forest needs at least two trees")
        if isinstance(self.subset_mode, str) and self.subset_mode not in ("sqrt", "all"):
            raise ValueError(f"unknown subset_mode {self.subset_mode!r}")
        if isinstance(self.subset_mode, int) and self.subset_mode < 1:
            raise ValueError("fixed subset size must be >= 1")

    def subset_size(self, p: int) -> int:
        if self.subset_mode == "sqrt":
            return math.ceil(math.sqrt(p))
        if self.subset_mode == "all":
            return p
        if self.subset_mode > p:
            raise ValueError(f"subset size {self.subset_mode} exceeds p={p}")
        return int(self.subset_mode)


def _gini_weighted(counts: np.ndarray) -> np.ndarray:
    # counts: (..., K) -> n * gini
    n = counts.sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        sq = np.where(n > 0, (counts ** 2).sum(axis=-1) / np.where(n > 0, n, 1), 0.0)
    return n - sq


def grow_tree(X: np.ndarray, y: np.ndarray, n_classes: int, max_depth: int, m: int, rng) -> "Leaf | Node":
    """Greedy top-down tree on the given (possibly repeated) rows."""
    p = X.shape[1]
    onehot = np.eye(n_classes, dtype=np.float64)

    def grow(idx, d):
        counts = np.bincount(y[idx], minlength=n_classes)
        label = int(np.argmax(counts))
        if d == max_depth or counts.max() == len(idx):
            return Leaf(label)
        feats = np.sort(rng.choice(p, size=m, replace=False))
        Xs = X[np.ix_(idx, feats)].astype(np.float64)
        c1 = Xs.T @ onehot[y[idx]]
        c0 = counts[None, :] - c1
        n1 = c1.sum(axis=1)
        valid = (n1 > 0) & (n1 < len(idx))
        if not valid.any():
            return Leaf(label)
        impurity = _gini_weighted(c0) + _gini_weighted(c1)
        impurity[~valid] = np.inf
        f = int(feats[int(np.argmin(impurity))])
        go = X[idx, f].astype(bool)
        return Node(f, grow(idx[~go], d + 1), grow(idx[go], d + 1))

    return grow(np.arange(X.shape[0]), 0)


def train_forest(ds: Dataset, cfg: ForestConfig, lam: float = 0.01):
    """Train ``cfg.n_trees`` bootstrap trees.

    Returns the trees as a :class:`TreeBatch` and each tree's objective
    (errors/n + lam * leaves) on the *full* ``ds``.
    """
    if ds.n < 2 or len(np.unique(ds.y)) < 2:
        raise DegenerateLabels("forest needs at least two rows and two classes")
    m = cfg.subset_size(ds.p)
    trees = []
    for i in range(cfg.n_trees):
        rng = np.random.default_rng([cfg.seed, i])
        boot = rng.integers(0, ds.n, size=ds.n)
        trees.append(grow_tree(ds.X[boot], ds.y[boot], ds.n_classes, cfg.max_depth, m, rng))
    batch = TreeBatch.from_trees(trees)
    losses = forest_losses(batch, ds, lam)
    return batch, losses


def forest_losses(batch: TreeBatch, ds: Dataset, lam: float) -> np.ndarray:
    errors = (batch.predict(ds.X) != ds.y[None, :]).sum(axis=1)
    return errors / ds.n + lam * batch.n_leaves()
