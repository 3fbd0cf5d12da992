"""Pure-Python search kernels; used when the compiled ``_core`` is unavailable.

Sample subsets are Python ints used as bitsets. The interface matches
``_core`` exactly so :mod:`realtrees.kernels` can swap them.
"""
from __future__ import annotations

import numpy as np

from .errors import RashomonSetOverflow

TIE_TOL = 1e-12
SLACK = 1e-9

NAME = "python"


def _bits_from_mask(mask: np.ndarray) -> int:
    packed = np.packbits(mask.astype(np.uint8)[::-1])
    return int.from_bytes(packed.tobytes(), "big") >> ((-len(mask)) % 8)


class Solver:
    """Optimal-tree and Rashomon-set search for one labelled dataset and lambda."""

    def __init__(self, X, y, n_classes: int, lam: float):
        X = np.asarray(X, dtype=np.uint8)
        y = np.asarray(y, dtype=np.int64)
        self.n, self.p = X.shape
        if self.n == 0:
            raise ValueError("solver needs at least one sample")
        self.k = int(n_classes)
        self.lam = float(lam)
        self.full = (1 << self.n) - 1
        self.feat = [_bits_from_mask(X[:, f]) for f in range(self.p)]
        self.cls = [_bits_from_mask(y == c) for c in range(self.k)]
        self.memo: dict = {}

    def value(self, e: int, l: int) -> float:
        return e / self.n + self.lam * l

    def _leaf(self, S):
        best_c, best_cnt = 0, -1
        for c, cb in enumerate(self.cls):
            cnt = (S & cb).bit_count()
            if cnt > best_cnt:
                best_c, best_cnt = c, cnt
        return S.bit_count() - best_cnt, best_c

    def _solve(self, S: int, d: int):
        """Return (value, errors, leaves, feature, label) of the best subtree."""
        if d > 0:
            hit = self.memo.get((S, d))
            if hit is not None:
                return hit
        e, c = self._leaf(S)
        best = (self.value(e, 1), e, 1, -1, c)
        lam = self.lam
        if d > 0 and best[0] > self.value(0, 2) + TIE_TOL:
            for f, fb in enumerate(self.feat):
                S1 = S & fb
                if S1 == 0 or S1 == S:
                    continue
                a = self._solve(S ^ S1, d - 1)
                if a[0] + lam > best[0] + TIE_TOL:
                    continue
                b = self._solve(S1, d - 1)
                ee, ll = a[1] + b[1], a[2] + b[2]
                v = self.value(ee, ll)
                if v < best[0] - TIE_TOL or (abs(v - best[0]) <= TIE_TOL and ll < best[2]):
                    best = (v, ee, ll, f, -1)
            self.memo[(S, d)] = best
        return best

    def _codes(self, S: int, d: int, out: list):
        entry = self._solve(S, d)
        f = entry[3]
        if f < 0:
            out.append(-(entry[4] + 1))
            return
        out.append(f)
        S1 = S & self.feat[f]
        self._codes(S ^ S1, d - 1, out)
        self._codes(S1, d - 1, out)

    def optimum(self, depth: int):
        """(codes, errors, leaves) of the optimal tree with depth <= ``depth``."""
        entry = self._solve(self.full, depth)
        codes: list[int] = []
        self._codes(self.full, depth, codes)
        return np.asarray(codes, dtype=np.int32), entry[1], entry[2]

    def _enum(self, S: int, d: int, used: int, budget: float, cap: int):
        out = []
        m = S.bit_count()
        for c, cb in enumerate(self.cls):
            e = m - (S & cb).bit_count()
            if self.value(e, 1) <= budget + SLACK:
                out.append((e, 1, (-(c + 1),)))
        if d == 0:
            return out
        for f, fb in enumerate(self.feat):
            if used >> f & 1:
                continue
            S1 = S & fb
            S0 = S ^ S1
            o0 = self._solve(S0, d - 1)[0]
            o1 = self._solve(S1, d - 1)[0]
            if o0 + o1 > budget + SLACK:
                continue
            sub_used = used | (1 << f)
            left = self._enum(S0, d - 1, sub_used, budget - o1, cap)
            if not left:
                continue
            min_left = min(self.value(e, l) for e, l, _ in left)
            right = self._enum(S1, d - 1, sub_used, budget - min_left, cap)
            right = sorted(((self.value(e, l), e, l, c) for e, l, c in right), key=lambda r: r[0])
            for ea, la, ca in left:
                va = self.value(ea, la)
                for vb, eb, lb, cb in right:
                    if va + vb > budget + SLACK:
                        break
                    out.append((ea + eb, la + lb, (f,) + ca + cb))
            if len(out) > cap:
                raise RashomonSetOverflow(cap, len(out))
        return out

    def enumerate(self, depth: int, threshold: float, cap: int):
        """Every legal tree with objective <= threshold (+1e-12).

        Returns ``(codes, offsets, errors, leaves)`` as numpy arrays in
        discovery order.
        """
        limit = threshold + TIE_TOL
        found = self._enum(self.full, depth, 0, limit, cap)
        found = [t for t in found if self.value(t[0], t[1]) <= limit]
        if len(found) > cap:
            raise RashomonSetOverflow(cap, len(found))
        offsets = np.zeros(len(found) + 1, dtype=np.int64)
        np.cumsum([len(t[2]) for t in found], out=offsets[1:])
        codes = np.fromiter((c for t in found for c in t[2]), dtype=np.int32, count=int(offsets[-1]))
        errors = np.array([t[0] for t in found], dtype=np.int64)
        leaves = np.array([t[1] for t in found], dtype=np.int64)
        return codes, offsets, errors, leaves


def _right_children(codes: np.ndarray, start: int, stop: int) -> np.ndarray:
    right = np.full(stop - start, -1, dtype=np.int64)
    stack = []  # internal nodes waiting for their left subtree to close
    for pos in range(start, stop):
        if codes[pos] >= 0:
            stack.append([pos, False])
            continue
        # a leaf closes subtrees up the stack
        while stack:
            top = stack[-1]
            if not top[1]:
                top[1] = True
                right[top[0] - start] = pos + 1
                break
            stack.pop()
    return right


def _predict_one(codes, start, stop, X):
    right = _right_children(codes, start, stop)
    out = np.empty(X.shape[0], dtype=np.int64)

    def route(pos, idx):
        c = codes[pos]
        if c < 0:
            out[idx] = -c - 1
            return
        go = X[idx, c].astype(bool)
        route(pos + 1, idx[~go])
        route(int(right[pos - start]), idx[go])

    route(start, np.arange(X.shape[0]))
    return out


def predict_codes(codes, offsets, X):
    k = len(offsets) - 1
    out = np.empty((k, X.shape[0]), dtype=np.int64)
    for t in range(k):
        out[t] = _predict_one(codes, int(offsets[t]), int(offsets[t + 1]), X)
    return out


def weighted_votes(codes, offsets, weights, X, n_classes):
    votes = np.zeros((X.shape[0], n_classes), dtype=np.float64)
    rows = np.arange(X.shape[0])
    for t in range(len(offsets) - 1):
        pred = _predict_one(codes, int(offsets[t]), int(offsets[t + 1]), X)
        np.add.at(votes, (rows, pred), weights[t])
    return votes
