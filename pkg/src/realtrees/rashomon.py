"""Exact optimal sparse trees and exhaustive epsilon-Rashomon sets."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .kernels import backend
from .tree import ObjectiveRecord, Tree, TreeBatch, decode, objective_value, to_text

DEFAULT_CAP = 500_000
BOUND_TOL = 1e-12


@dataclass(frozen=True)
class SearchConfig:
    max_depth: int = 3
    lam: float = 0.01
    epsilon: float = 0.0
    set_size_cap: int = DEFAULT_CAP

    def __post_init__(self):
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")


def make_solver(ds: Dataset, lam: float, kernel: str | None = None):
    """Build a search object for ``ds``; reuse it across depths/epsilons."""
    if ds.n == 0:
        raise ValueError("cannot search trees on an empty dataset")
    return backend(kernel).Solver(ds.X, ds.y, ds.n_classes, lam)


def optimal_tree(ds: Dataset, cfg: SearchConfig, solver=None, kernel: str | None = None):
    """Depth-bounded tree minimising errors/n + lam * leaves.

    Ties are broken by fewer leaves, then the smaller canonical key.
    """
    solver = solver or make_solver(ds, cfg.lam, kernel)
    codes, errors, leaves = solver.optimum(cfg.max_depth)
    return decode(codes), ObjectiveRecord(int(errors), ds.n, int(leaves), cfg.lam)


def _sort_keys(codes: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    # same byte layout as tree.key_from_codes, built for all trees at once
    c = codes.astype(np.int64)
    leaf = c < 0
    val = np.where(leaf, -c - 1, c)
    buf = np.empty((len(c), 3), dtype=np.uint8)
    buf[:, 0] = (~leaf).astype(np.uint8)
    buf[:, 1] = val >> 8
    buf[:, 2] = val & 0xFF
    raw = buf.tobytes()
    keys = [raw[3 * offsets[i]:3 * offsets[i + 1]] for i in range(len(offsets) - 1)]
    return np.array(sorted(range(len(keys)), key=keys.__getitem__), dtype=np.int64)


class RashomonSet:
    """All trees within ``(1 + epsilon)`` of the optimal objective.

    Members are held in a :class:`TreeBatch` ordered by canonical key;
    ``members`` materialises ``(Tree, ObjectiveRecord)`` pairs on demand.
    """

    def __init__(self, batch: TreeBatch, errors, leaves, n: int, lam: float,
                 optimum: float, epsilon: float, max_depth: int):
        self.batch = batch
        self.errors = np.asarray(errors, dtype=np.int64)
        self.leaves = np.asarray(leaves, dtype=np.int64)
        self.n = n
        self.lam = lam
        self.optimum = optimum
        self.epsilon = epsilon
        self.threshold = (1.0 + epsilon) * optimum
        self.max_depth = max_depth

    def __len__(self) -> int:
        return len(self.batch)

    @property
    def values(self) -> np.ndarray:
        return np.array([objective_value(int(e), self.n, int(l), self.lam)
                         for e, l in zip(self.errors, self.leaves)])

    def record(self, i: int) -> ObjectiveRecord:
        return ObjectiveRecord(int(self.errors[i]), self.n, int(self.leaves[i]), self.lam)

    @property
    def members(self) -> list[tuple[Tree, ObjectiveRecord]]:
        return [(self.batch[i], self.record(i)) for i in range(len(self))]

    def keys(self) -> list[bytes]:
        return [self.batch.key(i) for i in range(len(self))]

    def dump_tsv(self, fh) -> None:
        fh.write("tree\tmisclassified\tn\tleaves\tlambda\tvalue\n")
        for i in range(len(self)):
            rec = self.record(i)
            fh.write(f"{to_text(self.batch[i])}\t{rec.misclassified}\t{rec.n}\t"
                     f"{rec.leaves}\t{rec.lam!r}\t{rec.value!r}\n")


def enumerate_rashomon(ds: Dataset, cfg: SearchConfig, solver=None,
                       kernel: str | None = None) -> RashomonSet:
    """Enumerate every legal tree of depth <= ``cfg.max_depth`` whose objective
    is at most ``(1 + epsilon) * L*``.

    Raises :class:`~realtrees.errors.RashomonSetOverflow` beyond
    ``cfg.set_size_cap`` members.
    """
    solver = solver or make_solver(ds, cfg.lam, kernel)
    _, e_opt, l_opt = solver.optimum(cfg.max_depth)
    best = objective_value(int(e_opt), ds.n, int(l_opt), cfg.lam)
    threshold = (1.0 + cfg.epsilon) * best
    codes, offsets, errors, leaves = solver.enumerate(cfg.max_depth, threshold, cfg.set_size_cap)
    order = _sort_keys(codes, offsets)
    lens = np.diff(offsets)[order]
    new_offsets = np.zeros(len(order) + 1, dtype=np.int64)
    np.cumsum(lens, out=new_offsets[1:])
    gather = np.repeat(offsets[:-1][order] - new_offsets[:-1], lens) + np.arange(new_offsets[-1])
    new_codes = codes[gather]
    return RashomonSet(TreeBatch(new_codes, new_offsets), errors[order], leaves[order],
                       ds.n, cfg.lam, best, cfg.epsilon, cfg.max_depth)
