import io
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import all_trees, brute_rashomon, exact_value, leaves, to_pkg
from realtrees.data import Dataset
from realtrees.errors import RashomonSetOverflow
from realtrees.rashomon import SearchConfig, enumerate_rashomon, optimal_tree
from realtrees.tree import Leaf, Node, canonical_key, depth, is_valid, objective, to_text

XOR4 = Dataset(np.array([[0, 0], [0, 1], [1, 0], [1, 1]]), np.array([0, 1, 1, 0]), ("x0", "x1"))


def random_instance(rng, n_max=30, p_max=5, n_classes=2):
    n = int(rng.integers(1, n_max + 1))
    p = int(rng.integers(1, p_max + 1))
    X = rng.integers(0, 2, size=(n, p))
    y = rng.integers(0, n_classes, size=n)
    classes = tuple(str(c) for c in range(n_classes))
    return Dataset(X, y, tuple(f"x{j}" for j in range(p)), classes)


def assert_matches_brute(ds, depth_, lam, eps):
    rset = enumerate_rashomon(ds, SearchConfig(depth_, lam, eps))
    best, members = brute_rashomon(ds.X.tolist(), ds.y.tolist(), depth_, lam, eps, ds.n_classes)
    expect = {canonical_key(to_pkg(t)): float(v) for t, v in members}
    got = dict(zip(rset.keys(), rset.values))
    assert set(got) == set(expect)
    for k, v in got.items():
        assert abs(v - expect[k]) <= 1e-12
    assert abs(rset.optimum - float(best)) <= 1e-12


class TestExamples:
    def test_xor_optimum(self):
        tree, rec = optimal_tree(XOR4, SearchConfig(2, 0.01))
        assert rec.value == pytest.approx(0.04, abs=1e-15)
        assert rec.misclassified == 0

    def test_xor_set_at_zero(self):
        rset = enumerate_rashomon(XOR4, SearchConfig(2, 0.01, 0.0))
        assert sorted(to_text(t) for t, _ in rset.members) == [
            "(f0 (f1 l0 l1) (f1 l1 l0))",
            "(f1 (f0 l0 l1) (f0 l1 l0))",
        ]

    def test_constant_labels_single_leaf(self):
        ds = Dataset(np.random.default_rng(0).integers(0, 2, (12, 3)), np.ones(12), ("a", "b", "c"))
        tree, rec = optimal_tree(ds, SearchConfig(3, 0.01))
        assert tree == Leaf(1)
        assert rec.value == pytest.approx(0.01)

    def test_huge_lambda_majority_leaf(self):
        tree, _ = optimal_tree(XOR4.with_labels([1, 1, 1, 0]), SearchConfig(3, 10.0))
        assert tree == Leaf(1)

    def test_unique_optimum_at_zero(self):
        ds = Dataset(np.array([[0, 0], [1, 0], [0, 1], [1, 1]] * 3), np.array([0, 1, 0, 1] * 3), ("a", "b"))
        rset = enumerate_rashomon(ds, SearchConfig(2, 0.01, 0.0))
        assert len(rset) == 1
        assert rset.members[0][0] == Node(0, Leaf(0), Leaf(1))


class TestOracleEquivalence:
    @pytest.mark.parametrize("case", range(25))
    def test_binary(self, case):
        rng = np.random.default_rng(1000 + case)
        ds = random_instance(rng)
        assert_matches_brute(ds, int(rng.integers(1, 3)), [0.01, 0.001][case % 2], [0.0, 0.05, 0.25][case % 3])

    @pytest.mark.parametrize("case", range(5))
    def test_three_classes(self, case):
        rng = np.random.default_rng(2000 + case)
        ds = random_instance(rng, n_max=15, p_max=3, n_classes=3)
        assert_matches_brute(ds, 2, 0.01, [0.0, 0.1, 0.5][case % 3])

    @pytest.mark.parametrize("case", range(10))
    def test_optimal_tie_break(self, case):
        # exact optimum, then fewer leaves, then the smaller canonical key
        rng = np.random.default_rng(3000 + case)
        ds = random_instance(rng, n_max=12, p_max=4)
        d, lam = 2, [0.01, 0.001][case % 2]
        X, y = ds.X.tolist(), ds.y.tolist()
        scored = [(exact_value(t, X, y, lam), leaves(t), canonical_key(to_pkg(t)), t)
                  for t in all_trees(tuple(range(ds.p)), d)]
        want = min(scored, key=lambda s: s[:3])
        tree, rec = optimal_tree(ds, SearchConfig(d, lam))
        assert canonical_key(tree) == want[2]
        assert Fraction(rec.misclassified, ds.n) + Fraction(str(lam)) * rec.leaves == want[0]


class TestProperties:
    @given(st.integers(0, 2**32 - 1), st.sampled_from([1, 2, 3]), st.sampled_from([0.01, 0.001]))
    def test_monotone_in_epsilon(self, seed, d, lam):
        ds = random_instance(np.random.default_rng(seed), n_max=20, p_max=4)
        sizes = []
        prev = set()
        for eps in (0.0, 0.05, 0.2, 0.6):
            keys = set(enumerate_rashomon(ds, SearchConfig(d, lam, eps)).keys())
            assert prev <= keys
            prev = keys
            sizes.append(len(keys))
        assert sizes == sorted(sizes)

    @given(st.integers(0, 2**32 - 1), st.sampled_from([1, 2, 3]), st.sampled_from([0.0, 0.1, 0.3]))
    def test_members_within_bound(self, seed, d, eps):
        ds = random_instance(np.random.default_rng(seed), n_max=25, p_max=5)
        rset = enumerate_rashomon(ds, SearchConfig(d, 0.01, eps))
        tree, rec = optimal_tree(ds, SearchConfig(d, 0.01))
        assert rset.optimum == rec.value == rset.values.min()
        keys = rset.keys()
        assert keys == sorted(keys) and len(set(keys)) == len(keys)
        for t, r in rset.members:
            assert is_valid(t, d)
            assert r.value <= (1 + eps) * rset.optimum + 1e-12
            assert objective(t, ds, 0.01).value == r.value
        assert canonical_key(tree) in set(keys)
        assert depth(tree) <= d


def test_overflow_reports_cap():
    ds = random_instance(np.random.default_rng(5), n_max=10, p_max=4)
    with pytest.raises(RashomonSetOverflow) as exc:
        enumerate_rashomon(ds, SearchConfig(2, 0.01, 5.0, set_size_cap=3))
    assert exc.value.cap == 3
    assert "3" in str(exc.value)


def test_deterministic_order():
    ds = random_instance(np.random.default_rng(11), n_max=20, p_max=5)
    a = enumerate_rashomon(ds, SearchConfig(3, 0.01, 0.3))
    b = enumerate_rashomon(ds, SearchConfig(3, 0.01, 0.3))
    assert a.keys() == b.keys()
    assert np.array_equal(a.batch.codes, b.batch.codes)


def test_tsv_dump():
    buf = io.StringIO()
    enumerate_rashomon(XOR4, SearchConfig(2, 0.01)).dump_tsv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "tree\tmisclassified\tn\tleaves\tlambda\tvalue"
    assert lines[1].split("\t")[:4] == ["(f0 (f1 l0 l1) (f1 l1 l0))", "0", "4", "4"]


@pytest.mark.parametrize("bad", [{"max_depth": 0}, {"lam": -1.0}, {"epsilon": -0.1}])
def test_config_validation(bad):
    with pytest.raises(ValueError):
        SearchConfig(**bad)
