"""Query selection rules for every active learning strategy."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .committee import Weighting, WeightedCommittee, vote_distributions, vote_entropy
from .errors import ConfigError, EmptyPool
from .tree import Tree, leaf_index_rows, n_leaves

STRATEGY_NAMES = (
    "random",
    "uncertainty",
    "coreset",
    "qbc_rf_sqrt",
    "qbc_rf_sqrt_gibbs",
    "qbc_rf_all",
    "qbc_rf_all_gibbs",
    "unreal",
    "breal",
)

SCORE_TIE_TOL = 1e-12


@dataclass(frozen=True)
class StrategyKind:
    name: str
    family: str  # random | uncertainty | coreset | qbc_rf | real
    subset_mode: str | None = None
    weighting: Weighting | None = None

    @property
    def uses_committee(self) -> bool:
        return self.family in ("qbc_rf", "real")

    @property
    def needs_beta(self) -> bool:
        return self.weighting is Weighting.GIBBS

    @property
    def needs_structure(self) -> bool:
        return self.family in ("uncertainty", "qbc_rf", "real")

    @property
    def needs_epsilon(self) -> bool:
        return self.family == "real" or self.needs_beta


def parse_strategy(name: str) -> StrategyKind:
    if name not in STRATEGY_NAMES:
        raise ConfigError(f"unknown strategy {name!r}; valid names: {', '.join(STRATEGY_NAMES)}")
    if name in ("random", "uncertainty", "coreset"):
        return StrategyKind(name, name)
    if name == "unreal":
        return StrategyKind(name, "real", weighting=Weighting.UNIFORM)
    if name == "breal":
        return StrategyKind(name, "real", weighting=Weighting.GIBBS)
    _, _, mode, *rest = name.split("_")
    weighting = Weighting.GIBBS if rest == ["gibbs"] else Weighting.UNIFORM
    return StrategyKind(name, "qbc_rf", subset_mode=mode, weighting=weighting)


@dataclass(frozen=True)
class QueryResult:
    index: int  # position within the pool array
    scores: np.ndarray | None
    tie_count: int = 1

    @property
    def score(self) -> float:
        return float("nan") if self.scores is None else float(self.scores[self.index])


def _pick(scores: np.ndarray, maximize: bool) -> QueryResult:
    best = scores.max() if maximize else scores.min()
    if maximize:
        ties = np.flatnonzero(scores >= best - SCORE_TIE_TOL)
    else:
        ties = np.flatnonzero(scores <= best + SCORE_TIE_TOL)
    return QueryResult(int(ties[0]), scores, len(ties))


def _check_pool(pool_X) -> np.ndarray:
    pool_X = np.asarray(pool_X, dtype=np.uint8)
    if pool_X.ndim != 2 or pool_X.shape[0] == 0:
        raise EmptyPool("no unlabeled points left")
    return pool_X


def select_query_entropy(committee: WeightedCommittee, pool_X) -> QueryResult:
    """Pool point whose weighted committee vote has the highest entropy."""
    pool_X = _check_pool(pool_X)
    H = vote_entropy(vote_distributions(committee, pool_X))
    return _pick(np.atleast_1d(H), maximize=True)


@dataclass(frozen=True)
class FrequencyTree:
    """A tree plus the class frequencies of the training rows in each leaf."""

    tree: Tree
    frequencies: np.ndarray  # (n_leaves, n_classes), rows follow pre-order leaves

    def confidence(self, X) -> np.ndarray:
        return self.frequencies[leaf_index_rows(self.tree, X)].max(axis=1)


def fit_leaf_frequencies(tree: Tree, X, y, n_classes: int) -> FrequencyTree:
    leaf = leaf_index_rows(tree, X)
    counts = np.zeros((n_leaves(tree), n_classes))
    np.add.at(counts, (leaf, np.asarray(y)), 1.0)
    totals = counts.sum(axis=1, keepdims=True)
    # leaves without training rows carry no evidence: uniform frequencies
    freqs = np.where(totals > 0, counts / np.where(totals > 0, totals, 1.0), 1.0 / n_classes)
    return FrequencyTree(tree, freqs)


def select_query_uncertainty(ftree: FrequencyTree, pool_X) -> QueryResult:
    """Least-confidence: smallest top leaf frequency wins."""
    pool_X = _check_pool(pool_X)
    return _pick(ftree.confidence(pool_X), maximize=False)


def select_query_coreset(labeled_X, pool_X) -> QueryResult:
    """Pool point farthest (Euclidean) from its nearest labelled point."""
    pool_X = _check_pool(pool_X)
    L = np.asarray(labeled_X, dtype=np.int64)
    if L.ndim != 2 or L.shape[0] == 0:
        raise ValueError("coreset selection needs a labelled set")
    P = pool_X.astype(np.int64)
    # squared distance between 0/1 vectors is the Hamming count
    ham = P @ (1 - L).T + (1 - P) @ L.T
    return _pick(np.sqrt(ham.min(axis=1).astype(np.float64)), maximize=True)


def select_query_random(pool_size: int, rng: np.random.Generator) -> QueryResult:
    if pool_size <= 0:
        raise EmptyPool("no unlabeled points left")
    return QueryResult(int(rng.integers(pool_size)), None, 1)
