"""Sparse binary decision trees over binary features.

A tree is either a :class:`Leaf` or a :class:`Node`; samples with the split
feature equal to 0 go left, 1 goes right. Trees also have a flat pre-order
integer code (``feature >= 0`` for an internal node, ``-(label + 1)`` for a
leaf) which is what the compiled kernels consume.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, Sequence, Union

import numpy as np

from .errors import FeatureIndexOutOfRange


@dataclass(frozen=True, slots=True)
class Leaf:
    label: int


@dataclass(frozen=True, slots=True)
class Node:
    feature: int
    left: "Tree"
    right: "Tree"


Tree = Union[Leaf, Node]


def n_leaves(tree: Tree) -> int:
    if isinstance(tree, Leaf):
        return 1
    return n_leaves(tree.left) + n_leaves(tree.right)


def depth(tree: Tree) -> int:
    if isinstance(tree, Leaf):
        return 0
    return 1 + max(depth(tree.left), depth(tree.right))


def n_nodes(tree: Tree) -> int:
    if isinstance(tree, Leaf):
        return 1
    return 1 + n_nodes(tree.left) + n_nodes(tree.right)


def is_valid(tree: Tree, max_depth: int | None = None, _used=frozenset()) -> bool:
    """Check the path-distinct-feature rule (and optionally a depth bound)."""
    if max_depth is not None and depth(tree) > max_depth:
        return False
    if isinstance(tree, Leaf):
        return True
    if tree.feature in _used or tree.feature < 0:
        return False
    used = _used | {tree.feature}
    return is_valid(tree.left, None, used) and is_valid(tree.right, None, used)


def max_feature(tree: Tree) -> int:
    if isinstance(tree, Leaf):
        return -1
    return max(tree.feature, max_feature(tree.left), max_feature(tree.right))


def predict(tree: Tree, x) -> int:
    node = tree
    while isinstance(node, Node):
        if node.feature >= len(x):
            raise FeatureIndexOutOfRange(f"split on feature {node.feature}, row has {len(x)}")
        node = node.right if x[node.feature] else node.left
    return node.label


def predict_rows(tree: Tree, X: np.ndarray) -> np.ndarray:
    """Vectorised prediction for every row of ``X``."""
    X = np.asarray(X)
    if max_feature(tree) >= X.shape[1]:
        raise FeatureIndexOutOfRange(f"tree uses feature {max_feature(tree)}, X has {X.shape[1]}")
    out = np.empty(X.shape[0], dtype=np.int64)

    def route(node, idx):
        if isinstance(node, Leaf):
            out[idx] = node.label
            return
        go_right = X[idx, node.feature].astype(bool)
        route(node.left, idx[~go_right])
        route(node.right, idx[go_right])

    route(tree, np.arange(X.shape[0]))
    return out


def leaf_index_rows(tree: Tree, X: np.ndarray) -> np.ndarray:
    """Pre-order index of the leaf each row lands in."""
    X = np.asarray(X)
    out = np.empty(X.shape[0], dtype=np.int64)
    counter = [0]

    def route(node, idx):
        if isinstance(node, Leaf):
            out[idx] = counter[0]
            counter[0] += 1
            return
        go_right = X[idx, node.feature].astype(bool)
        route(node.left, idx[~go_right])
        route(node.right, idx[go_right])

    route(tree, np.arange(X.shape[0]))
    return out


@dataclass(frozen=True)
class ObjectiveRecord:
    """Misclassification rate plus a per-leaf penalty."""

    misclassified: int
    n: int
    leaves: int
    lam: float
    value: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "value", objective_value(self.misclassified, self.n, self.leaves, self.lam))


def objective_value(misclassified: int, n: int, leaves: int, lam: float) -> float:
    # the single place the objective is evaluated, so equal counts give equal floats
    return misclassified / n + lam * leaves


def objective(tree: Tree, ds, lam: float) -> ObjectiveRecord:
    if ds.n == 0:
        raise ValueError("objective needs a non-empty dataset")
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    pred = predict_rows(tree, ds.X)
    return ObjectiveRecord(int((pred != ds.y).sum()), ds.n, n_leaves(tree), lam)


# ------------------------------------------------------------ codes and keys


def encode(tree: Tree) -> tuple[int, ...]:
    out: list[int] = []

    def walk(node):
        if isinstance(node, Leaf):
            out.append(-(node.label + 1))
        else:
            out.append(node.feature)
            walk(node.left)
            walk(node.right)

    walk(tree)
    return tuple(out)


def decode(codes: Sequence[int]) -> Tree:
    it = iter(codes)

    def build():
        c = int(next(it))
        if c < 0:
            return Leaf(-c - 1)
        left = build()
        return Node(c, left, build())

    tree = build()
    if next(it, None) is not None:
        raise ValueError("trailing codes after a complete tree")
    return tree


def key_from_codes(codes: Sequence[int]) -> bytes:
    parts = []
    for c in codes:
        c = int(c)
        if c < 0:
            parts.append(b"\x00" + (-c - 1).to_bytes(2, "big"))
        else:
            parts.append(b"\x01" + c.to_bytes(2, "big"))
    return b"".join(parts)


def canonical_key(tree: Tree) -> bytes:
    """Pre-order byte serialisation; leaf marker sorts before split marker."""
    return key_from_codes(encode(tree))


def to_text(tree: Tree) -> str:
    if isinstance(tree, Leaf):
        return f"l{tree.label}"
    return f"(f{tree.feature} {to_text(tree.left)} {to_text(tree.right)})"


_TOKEN = re.compile(r"\(|\)|f\d+|l\d+")


def parse_text(text: str) -> Tree:
    tokens = _TOKEN.findall(text)
    if "".join(tokens) != re.sub(r"\s+", "", text):
        raise ValueError(f"cannot parse tree text {text!r}")
    pos = 0

    def build():
        nonlocal pos
        tok = tokens[pos]
        pos += 1
        if tok.startswith("l"):
            return Leaf(int(tok[1:]))
        if tok != "(":
            raise ValueError(f"unexpected token {tok!r}")
        feat = tokens[pos]
        pos += 1
        if not feat.startswith("f"):
            raise ValueError(f"expected split feature, got {feat!r}")
        left = build()
        right = build()
        if tokens[pos] != ")":
            raise ValueError("unbalanced parentheses")
        pos += 1
        return Node(int(feat[1:]), left, right)

    tree = build()
    if pos != len(tokens):
        raise ValueError("trailing tokens after tree")
    return tree


# --------------------------------------------------------- tree edit distance


def _node_label(node: Tree):
    return ("leaf", node.label) if isinstance(node, Leaf) else ("split", node.feature)


def _children(node: Tree):
    return () if isinstance(node, Leaf) else (node.left, node.right)


def _postorder(tree: Tree):
    labels, lmd = [], []

    def walk(node):
        kids = _children(node)
        first = None
        for k in kids:
            i = walk(k)
            if first is None:
                first = lmd[i]
        labels.append(_node_label(node))
        lmd.append(len(labels) - 1 if first is None else first)
        return len(labels) - 1

    walk(tree)
    return labels, lmd


def _keyroots(lmd):
    seen = {}
    for i, l in enumerate(lmd):
        seen[l] = i  # last (highest postorder) node with this leftmost leaf
    return sorted(seen.values())


def tree_edit_distance(a: Tree, b: Tree) -> int:
    """Unit-cost ordered edit distance between two trees (Zhang-Shasha).

    Node labels are ``("split", feature)`` or ``("leaf", label)``, children
    ordered (left, right).
    """
    la, ma = _postorder(a)
    lb, mb = _postorder(b)
    na, nb = len(la), len(lb)
    td = np.zeros((na, nb), dtype=np.int64)

    for i in _keyroots(ma):
        for j in _keyroots(mb):
            li, lj = ma[i], mb[j]
            rows, cols = i - li + 2, j - lj + 2
            fd = np.zeros((rows, cols), dtype=np.int64)
            fd[:, 0] = np.arange(rows)
            fd[0, :] = np.arange(cols)
            for x in range(li, i + 1):
                fx = x - li + 1
                for y in range(lj, j + 1):
                    fy = y - lj + 1
                    if ma[x] == li and mb[y] == lj:
                        cost = 0 if la[x] == lb[y] else 1
                        fd[fx, fy] = min(fd[fx - 1, fy] + 1, fd[fx, fy - 1] + 1, fd[fx - 1, fy - 1] + cost)
                        td[x, y] = fd[fx, fy]
                    else:
                        px, py = ma[x] - li, mb[y] - lj
                        fd[fx, fy] = min(fd[fx - 1, fy] + 1, fd[fx, fy - 1] + 1, fd[px, py] + td[x, y])
    return int(td[na - 1, nb - 1])


# --------------------------------------------------------------- tree batches


class TreeBatch(Sequence):
    """Many trees stored as one flat code array plus offsets.

    Indexing decodes a single :data:`Tree`; prediction and weighted voting go
    through the compiled kernels without materialising Python trees.
    """

    def __init__(self, codes, offsets):
        self.codes = np.ascontiguousarray(codes, dtype=np.int32)
        self.offsets = np.ascontiguousarray(offsets, dtype=np.int64)
        if self.offsets.ndim != 1 or self.offsets[0] != 0 or self.offsets[-1] != len(self.codes):
            raise ValueError("offsets do not describe the code array")

    @classmethod
    def from_trees(cls, trees) -> "TreeBatch":
        return cls.from_code_lists([encode(t) for t in trees])

    @classmethod
    def from_code_lists(cls, code_lists) -> "TreeBatch":
        lens = [len(c) for c in code_lists]
        offsets = np.zeros(len(lens) + 1, dtype=np.int64)
        np.cumsum(lens, out=offsets[1:])
        flat = np.fromiter((c for cl in code_lists for c in cl), dtype=np.int32, count=int(offsets[-1]))
        return cls(flat, offsets)

    def __len__(self) -> int:
        return len(self.offsets) - 1

    def codes_of(self, i: int) -> np.ndarray:
        return self.codes[self.offsets[i]:self.offsets[i + 1]]

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        if i < 0:
            i += len(self)
        if not 0 <= i < len(self):
            raise IndexError(i)
        return decode(self.codes_of(i))

    def __iter__(self) -> Iterator[Tree]:
        for i in range(len(self)):
            yield self[i]

    def key(self, i: int) -> bytes:
        return key_from_codes(self.codes_of(i))

    def n_leaves(self) -> np.ndarray:
        neg = (self.codes < 0).astype(np.int64)
        csum = np.concatenate([[0], np.cumsum(neg)])
        return csum[self.offsets[1:]] - csum[self.offsets[:-1]]

    def max_feature(self) -> int:
        return int(self.codes.max()) if len(self.codes) else -1

    def predict(self, X) -> np.ndarray:
        """(n_trees, n_rows) matrix of predicted labels."""
        from .kernels import backend

        X = np.ascontiguousarray(X, dtype=np.uint8)
        self._check(X)
        return backend().predict_codes(self.codes, self.offsets, X)

    def weighted_votes(self, weights, X, n_classes: int) -> np.ndarray:
        """(n_rows, n_classes) matrix of summed member weights per label."""
        from .kernels import backend

        X = np.ascontiguousarray(X, dtype=np.uint8)
        self._check(X)
        w = np.ascontiguousarray(weights, dtype=np.float64)
        if len(w) != len(self):
            raise ValueError("one weight per tree required")
        return backend().weighted_votes(self.codes, self.offsets, w, X, n_classes)

    def _check(self, X):
        if X.ndim != 2:
            raise ValueError("X must be two-dimensional")
        if self.max_feature() >= X.shape[1]:
            raise FeatureIndexOutOfRange(f"tree uses feature {self.max_feature()}, X has {X.shape[1]}")
