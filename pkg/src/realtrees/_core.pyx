# distutils: language = c++
# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled search kernels. Same interface and results as ``_pycore``.

Sample subsets are fixed-width arrays of 64-bit words; the memo table is
keyed on the raw subset bytes plus the remaining depth.
"""
import numpy as np
cimport numpy as cnp
from cython.operator cimport dereference as deref
from libc.stdint cimport uint64_t, int32_t, int64_t, uint8_t
from libcpp.string cimport string
from libcpp.unordered_map cimport unordered_map
from libcpp.vector cimport vector

from .errors import RashomonSetOverflow

cnp.import_array()

cdef extern from *:
    """
    #include <algorithm>
    #include <numeric>
    #include <vector>
    static inline int rt_popcount(unsigned long long x) { return __builtin_popcountll(x); }
    static void rt_argsort(const std::vector<double>& v, std::vector<int>& idx) {
        idx.resize(v.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&v](int a, int b) { return v[a] < v[b]; });
    }
    struct RTList {
        std::vector<double> val;
        std::vector<int> err;
        std::vector<int> nl;
        std::vector<int> code;
        std::vector<long long> start;
        RTList() : start(1, 0) {}
        size_t size() const { return val.size(); }
        void clear() { val.clear(); err.clear(); nl.clear(); code.clear(); start.assign(1, 0); }
    };
    """
    int rt_popcount(unsigned long long x) nogil
    void rt_argsort(vector[double]& v, vector[int]& idx) nogil
    cdef cppclass RTList:
        vector[double] val
        vector[int] err
        vector[int] nl
        vector[int] code
        vector[long long] start
        RTList()
        size_t size()
        void clear()

NAME = "cython"

cdef double TIE_TOL = 1e-12
cdef double SLACK = 1e-9


cdef struct Entry:
    double value
    int errors
    int leaves
    int feature
    int label


cdef class Solver:
    """Optimal-tree and Rashomon-set search for one labelled dataset and lambda."""

    cdef int n, p, k, W
    cdef double lam
    cdef vector[uint64_t] feat
    cdef vector[uint64_t] cls
    cdef vector[uint64_t] full
    cdef unordered_map[string, Entry] memo
    cdef vector[uint64_t] scratch  # two child bitsets per depth level
    cdef vector[string] keys  # one reusable memo key per depth level
    cdef vector[int] pair  # class counts of S & f & g, laid out [f, g, c]
    cdef vector[int] cnt  # class counts of a candidate child
    cdef size_t cap

    def __init__(self, X, y, int n_classes, double lam):
        cdef cnp.ndarray[uint8_t, ndim=2] Xa = np.ascontiguousarray(X, dtype=np.uint8)
        cdef cnp.ndarray[int64_t, ndim=1] ya = np.ascontiguousarray(y, dtype=np.int64)
        cdef int i, f
        self.n = Xa.shape[0]
        self.p = Xa.shape[1]
        if self.n == 0:
            raise ValueError("solver needs at least one sample")
        self.k = n_classes
        self.lam = lam
        self.W = (self.n + 63) // 64
        self.feat.assign(self.p * self.W, 0)
        self.cls.assign(self.k * self.W, 0)
        self.full.assign(self.W, 0)
        for i in range(self.n):
            self.full[i >> 6] |= (<uint64_t>1) << (i & 63)
            self.cls[ya[i] * self.W + (i >> 6)] |= (<uint64_t>1) << (i & 63)
            for f in range(self.p):
                if Xa[i, f]:
                    self.feat[f * self.W + (i >> 6)] |= (<uint64_t>1) << (i & 63)

    cdef inline double value(self, int e, int l) noexcept nogil:
        return <double>e / <double>self.n + self.lam * <double>l

    cdef inline int count(self, const uint64_t* S) noexcept nogil:
        cdef int w, c = 0
        for w in range(self.W):
            c += rt_popcount(S[w])
        return c

    cdef void leaf(self, const uint64_t* S, int* errors, int* label) noexcept nogil:
        cdef int c, w, cnt, best_c = 0, best_cnt = -1
        cdef const uint64_t* cb
        for c in range(self.k):
            cb = &self.cls[c * self.W]
            cnt = 0
            for w in range(self.W):
                cnt += rt_popcount(S[w] & cb[w])
            if cnt > best_cnt:
                best_c = c
                best_cnt = cnt
        errors[0] = self.count(S) - best_cnt
        label[0] = best_c

    cdef void stump(self, const uint64_t* S, Entry* best) noexcept:
        # best single split, from per-class counts of each right child
        cdef int c, f, w, m, right, e0, e1, hi0, hi1, cnt, ee
        cdef double v
        cdef const uint64_t* fb
        cdef const uint64_t* cb
        cdef vector[int] tot
        tot.resize(self.k)
        for c in range(self.k):
            cb = &self.cls[c * self.W]
            cnt = 0
            for w in range(self.W):
                cnt += rt_popcount(S[w] & cb[w])
            tot[c] = cnt
        m = self.count(S)
        for f in range(self.p):
            fb = &self.feat[f * self.W]
            right = 0
            hi0 = -1
            hi1 = -1
            for c in range(self.k):
                cb = &self.cls[c * self.W]
                cnt = 0
                for w in range(self.W):
                    cnt += rt_popcount(S[w] & fb[w] & cb[w])
                right += cnt
                if cnt > hi1:
                    hi1 = cnt
                if tot[c] - cnt > hi0:
                    hi0 = tot[c] - cnt
            if right == 0 or right == m:
                continue
            ee = (m - right - hi0) + (right - hi1)
            v = self.value(ee, 2)
            if v < best.value - TIE_TOL:
                best.value = v
                best.errors = ee
                best.leaves = 2
                best.feature = f
                best.label = -1

    cdef inline void leaf_counts(self, const int* cc, int m, int* errors, int* label) noexcept nogil:
        cdef int c, hi = -1
        for c in range(self.k):
            if cc[c] > hi:
                hi = cc[c]
                label[0] = c
        errors[0] = m - hi

    cdef Entry child1(self, int side, int f, int m) noexcept:
        # depth-1 optimum of the f==side child of the current depth-2 node, from pair counts
        cdef Entry best
        cdef int g, c, e, lab, e0, e1, right
        cdef double v
        cdef int K = self.k
        cdef int* own = &self.cnt[0]
        cdef int* hi = &self.cnt[K]
        cdef int* lo = &self.cnt[2 * K]
        cdef const int* tot = &self.cnt[3 * K]
        cdef const int* pf = &self.pair[f * self.p * K]
        cdef const int* ff = &pf[f * K]
        for c in range(K):
            own[c] = ff[c] if side else tot[c] - ff[c]
        self.leaf_counts(own, m, &e, &lab)
        best.value = self.value(e, 1)
        best.errors = e
        best.leaves = 1
        best.feature = -1
        best.label = lab
        if best.value <= self.value(0, 2) + TIE_TOL:
            return best
        for g in range(self.p):
            right = 0
            for c in range(K):
                if side:
                    hi[c] = pf[g * K + c]
                else:
                    hi[c] = self.pair[(g * self.p + g) * K + c] - pf[g * K + c]
                lo[c] = own[c] - hi[c]
                right += hi[c]
            if right == 0 or right == m:
                continue
            self.leaf_counts(hi, right, &e1, &lab)
            self.leaf_counts(lo, m - right, &e0, &lab)
            v = self.value(e0 + e1, 2)
            if v < best.value - TIE_TOL:
                best.value = v
                best.errors = e0 + e1
                best.leaves = 2
                best.feature = g
                best.label = -1
        return best

    cdef void solve2(self, const uint64_t* S, Entry* best) noexcept:
        # best depth-2 tree below S, from class counts of every feature pair
        cdef int f, g, c, w, m, right, ll, ee
        cdef int K = self.k
        cdef double v
        cdef Entry a, b
        cdef const uint64_t* fb
        cdef const uint64_t* gb
        cdef const uint64_t* cb
        cdef int* tot = &self.cnt[3 * K]
        cdef int n_
        cdef uint64_t x
        for c in range(K):
            cb = &self.cls[c * self.W]
            n_ = 0
            for w in range(self.W):
                n_ += rt_popcount(S[w] & cb[w])
            tot[c] = n_
        m = self.count(S)
        for f in range(self.p):
            fb = &self.feat[f * self.W]
            for g in range(f, self.p):
                gb = &self.feat[g * self.W]
                for c in range(K):
                    cb = &self.cls[c * self.W]
                    n_ = 0
                    for w in range(self.W):
                        x = S[w] & fb[w] & gb[w] & cb[w]
                        n_ += rt_popcount(x)
                    self.pair[(f * self.p + g) * K + c] = n_
                    self.pair[(g * self.p + f) * K + c] = n_
        for f in range(self.p):
            right = 0
            for c in range(K):
                right += self.pair[(f * self.p + f) * K + c]
            if right == 0 or right == m:
                continue
            a = self.child1(0, f, m - right)
            if a.value + self.lam > best.value + TIE_TOL:
                continue
            b = self.child1(1, f, right)
            ee = a.errors + b.errors
            ll = a.leaves + b.leaves
            v = self.value(ee, ll)
            if v < best.value - TIE_TOL or (abs(v - best.value) <= TIE_TOL and ll < best.leaves):
                best.value = v
                best.errors = ee
                best.leaves = ll
                best.feature = f
                best.label = -1

    cdef Entry solve(self, const uint64_t* S, int d) noexcept:
        cdef Entry best, a, b
        cdef int e, c, f, w, ee, ll
        cdef bint any0, any1
        cdef double v
        cdef uint64_t* s0
        cdef uint64_t* s1
        cdef const uint64_t* fb
        cdef unordered_map[string, Entry].iterator it
        if d > 0:
            self.keys[d].assign(<const char*>S, self.W * 8)
            self.keys[d].push_back(<char>d)
            it = self.memo.find(self.keys[d])
            if it != self.memo.end():
                return deref(it).second
        self.leaf(S, &e, &c)
        best.value = self.value(e, 1)
        best.errors = e
        best.leaves = 1
        best.feature = -1
        best.label = c
        if d == 1 and best.value > self.value(0, 2) + TIE_TOL:
            self.stump(S, &best)
            self.memo[self.keys[d]] = best
        elif d == 2 and best.value > self.value(0, 2) + TIE_TOL:
            self.solve2(S, &best)
            self.memo[self.keys[d]] = best
        elif d > 1 and best.value > self.value(0, 2) + TIE_TOL:
            s0 = &self.scratch[2 * d * self.W]
            s1 = s0 + self.W
            for f in range(self.p):
                fb = &self.feat[f * self.W]
                any0 = False
                any1 = False
                for w in range(self.W):
                    s1[w] = S[w] & fb[w]
                    s0[w] = S[w] & ~fb[w]
                    any1 = any1 or s1[w] != 0
                    any0 = any0 or s0[w] != 0
                if not (any0 and any1):
                    continue
                a = self.solve(s0, d - 1)
                if a.value + self.lam > best.value + TIE_TOL:
                    continue
                b = self.solve(s1, d - 1)
                ee = a.errors + b.errors
                ll = a.leaves + b.leaves
                v = self.value(ee, ll)
                if v < best.value - TIE_TOL or (abs(v - best.value) <= TIE_TOL and ll < best.leaves):
                    best.value = v
                    best.errors = ee
                    best.leaves = ll
                    best.feature = f
                    best.label = -1
            self.memo[self.keys[d]] = best
        return best

    cdef void codes(self, const uint64_t* S, int d, vector[int]& out) noexcept:
        cdef Entry entry = self.solve(S, d)
        cdef vector[uint64_t] s0, s1
        cdef int w
        cdef const uint64_t* fb
        if entry.feature < 0:
            out.push_back(-(entry.label + 1))
            return
        out.push_back(entry.feature)
        s0.resize(self.W)
        s1.resize(self.W)
        fb = &self.feat[entry.feature * self.W]
        for w in range(self.W):
            s1[w] = S[w] & fb[w]
            s0[w] = S[w] & ~fb[w]
        self.codes(s0.data(), d - 1, out)
        self.codes(s1.data(), d - 1, out)

    cdef void reserve(self, int depth):
        if <int>self.keys.size() <= depth:
            self.keys.resize(depth + 1)
            self.scratch.assign(2 * (depth + 1) * self.W, 0)
        if self.pair.size() == 0:
            self.pair.assign(self.p * self.p * self.k, 0)
            self.cnt.assign(4 * self.k, 0)

    def optimum(self, int depth):
        """(codes, errors, leaves) of the optimal tree with depth <= ``depth``."""
        self.reserve(depth)
        cdef Entry entry = self.solve(self.full.data(), depth)
        cdef vector[int] out
        self.codes(self.full.data(), depth, out)
        return np.asarray(out, dtype=np.int32), entry.errors, entry.leaves

    cdef int enum_(self, const uint64_t* S, int d, vector[char]& used, double budget, RTList& out) except -1:
        cdef int c, w, e, f, m, a, jj, bi, ee, ll
        cdef const uint64_t* cb
        cdef const uint64_t* fb
        cdef vector[uint64_t] s0, s1
        cdef double o0, o1, va, min_left
        cdef RTList L, R
        cdef vector[int] order
        cdef long long q
        m = self.count(S)
        for c in range(self.k):
            cb = &self.cls[c * self.W]
            e = m
            for w in range(self.W):
                e -= rt_popcount(S[w] & cb[w])
            if self.value(e, 1) <= budget + SLACK:
                out.val.push_back(self.value(e, 1))
                out.err.push_back(e)
                out.nl.push_back(1)
                out.code.push_back(-(c + 1))
                out.start.push_back(out.code.size())
        if d == 0:
            return 0
        s0.resize(self.W)
        s1.resize(self.W)
        for f in range(self.p):
            if used[f]:
                continue
            fb = &self.feat[f * self.W]
            for w in range(self.W):
                s1[w] = S[w] & fb[w]
                s0[w] = S[w] & ~fb[w]
            o0 = self.solve(s0.data(), d - 1).value
            o1 = self.solve(s1.data(), d - 1).value
            if o0 + o1 > budget + SLACK:
                continue
            used[f] = 1
            L.clear()
            R.clear()
            self.enum_(s0.data(), d - 1, used, budget - o1, L)
            if L.size() == 0:
                used[f] = 0
                continue
            min_left = L.val[0]
            for a in range(<int>L.size()):
                if L.val[a] < min_left:
                    min_left = L.val[a]
            self.enum_(s1.data(), d - 1, used, budget - min_left, R)
            used[f] = 0
            rt_argsort(R.val, order)
            for a in range(<int>L.size()):
                va = L.val[a]
                for jj in range(<int>R.size()):
                    bi = order[jj]
                    if va + R.val[bi] > budget + SLACK:
                        break
                    ee = L.err[a] + R.err[bi]
                    ll = L.nl[a] + R.nl[bi]
                    out.val.push_back(self.value(ee, ll))
                    out.err.push_back(ee)
                    out.nl.push_back(ll)
                    out.code.push_back(f)
                    for q in range(L.start[a], L.start[a + 1]):
                        out.code.push_back(L.code[q])
                    for q in range(R.start[bi], R.start[bi + 1]):
                        out.code.push_back(R.code[q])
                    out.start.push_back(out.code.size())
            if out.size() > self.cap:
                raise RashomonSetOverflow(self.cap, out.size())
        return 0

    def enumerate(self, int depth, double threshold, cap):
        """Every legal tree with objective <= threshold (+1e-12).

        Returns ``(codes, offsets, errors, leaves)`` as numpy arrays in
        discovery order.
        """
        cdef RTList found
        cdef vector[char] used
        cdef double limit = threshold + TIE_TOL
        cdef size_t i, pos = 0
        cdef long long q
        cdef int32_t[::1] cv
        used.assign(self.p, 0)
        self.cap = cap
        self.reserve(depth)
        self.enum_(self.full.data(), depth, used, limit, found)
        keep = []
        for i in range(found.size()):
            if self.value(found.err[i], found.nl[i]) <= limit:
                keep.append(i)
        if len(keep) > cap:
            raise RashomonSetOverflow(cap, len(keep))
        offsets = np.zeros(len(keep) + 1, dtype=np.int64)
        errors = np.empty(len(keep), dtype=np.int64)
        leaves = np.empty(len(keep), dtype=np.int64)
        total = 0
        for j, i in enumerate(keep):
            total += found.start[i + 1] - found.start[i]
            offsets[j + 1] = total
            errors[j] = found.err[i]
            leaves[j] = found.nl[i]
        codes = np.empty(total, dtype=np.int32)
        cv = codes
        for i in keep:
            for q in range(found.start[i], found.start[i + 1]):
                cv[pos] = found.code[q]
                pos += 1
        return codes, offsets, errors, leaves


cdef void right_children(const int32_t* codes, int64_t n, vector[int64_t]& right) noexcept nogil:
    cdef vector[int64_t] stack
    cdef vector[char] done
    cdef int64_t pos
    right.assign(n, -1)
    for pos in range(n):
        if codes[pos] >= 0:
            stack.push_back(pos)
            done.push_back(0)
            continue
        while stack.size() > 0:
            if not done[done.size() - 1]:
                done[done.size() - 1] = 1
                right[stack.back()] = pos + 1
                break
            stack.pop_back()
            done.pop_back()


def predict_codes(const int32_t[::1] codes, const int64_t[::1] offsets, const uint8_t[:, ::1] X):
    cdef Py_ssize_t k = offsets.shape[0] - 1
    cdef Py_ssize_t m = X.shape[0]
    out = np.empty((k, m), dtype=np.int64)
    cdef int64_t[:, ::1] ov = out
    cdef vector[int64_t] right
    cdef Py_ssize_t t, i
    cdef int64_t pos, start
    cdef int32_t c
    with nogil:
        for t in range(k):
            start = offsets[t]
            right_children(&codes[0] + start, offsets[t + 1] - start, right)
            for i in range(m):
                pos = 0
                c = codes[start]
                while c >= 0:
                    if X[i, c]:
                        pos = right[pos]
                    else:
                        pos = pos + 1
                    c = codes[start + pos]
                ov[t, i] = -c - 1
    return out


def weighted_votes(const int32_t[::1] codes, const int64_t[::1] offsets, const double[::1] weights,
                   const uint8_t[:, ::1] X, int n_classes):
    cdef Py_ssize_t k = offsets.shape[0] - 1
    cdef Py_ssize_t m = X.shape[0]
    votes = np.zeros((m, n_classes), dtype=np.float64)
    cdef double[:, ::1] vv = votes
    cdef vector[int64_t] right
    cdef Py_ssize_t t, i
    cdef int64_t pos, start
    cdef int32_t c
    with nogil:
        for t in range(k):
            start = offsets[t]
            right_children(&codes[0] + start, offsets[t + 1] - start, right)
            for i in range(m):
                pos = 0
                c = codes[start]
                while c >= 0:
                    if X[i, c]:
                        pos = right[pos]
                    else:
                        pos = pos + 1
                    c = codes[start + pos]
                vv[i, -c - 1] += weights[t]
    return votes
