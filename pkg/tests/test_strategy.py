import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from realtrees.committee import WeightedCommittee, Weighting
from realtrees.errors import ConfigError, EmptyPool
from realtrees.strategy import (
    STRATEGY_NAMES,
    fit_leaf_frequencies,
    parse_strategy,
    select_query_coreset,
    select_query_entropy,
    select_query_random,
    select_query_uncertainty,
)
from realtrees.tree import Leaf, Node, TreeBatch


def committee(trees, losses=None, mode=Weighting.UNIFORM, beta=0.0):
    losses = [0.0] * len(trees) if losses is None else losses
    return WeightedCommittee.build(TreeBatch.from_trees(trees), losses, mode, beta)


class TestParse:
    def test_every_name(self):
        for name in STRATEGY_NAMES:
            assert parse_strategy(name).name == name

    def test_families(self):
        assert parse_strategy("breal").weighting is Weighting.GIBBS
        assert parse_strategy("unreal").weighting is Weighting.UNIFORM
        k = parse_strategy("qbc_rf_all_gibbs")
        assert (k.family, k.subset_mode, k.weighting) == ("qbc_rf", "all", Weighting.GIBBS)
        assert parse_strategy("qbc_rf_sqrt").weighting is Weighting.UNIFORM
        assert not parse_strategy("random").needs_structure

    def test_unknown_lists_valid(self):
        with pytest.raises(ConfigError) as exc:
            parse_strategy("nope")
        assert "breal" in str(exc.value)


class TestEntropy:
    def test_unanimous_picks_lowest(self):
        q = select_query_entropy(committee([Leaf(1), Leaf(1)]), np.zeros((5, 2), dtype=np.uint8))
        assert q.index == 0 and q.tie_count == 5 and q.score == 0.0

    def test_picks_disagreement(self):
        c = committee([Node(0, Leaf(0), Leaf(1)), Leaf(0)])
        pool = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=np.uint8)
        q = select_query_entropy(c, pool)
        assert q.index == 2 and q.tie_count == 2
        assert q.score == pytest.approx(np.log(2))

    def test_gibbs_changes_choice(self):
        trees = [Node(0, Leaf(0), Leaf(1)), Node(1, Leaf(0), Leaf(1)), Leaf(0)]
        pool = np.array([[1, 0], [0, 1]], dtype=np.uint8)
        # tree 0 dominant: row 0 gets vote mass from tree 0 only, row 1 from tree 1 only
        q = select_query_entropy(committee(trees, [0.0, 0.5, 0.0], Weighting.GIBBS, 3.0), pool)
        assert q.index == 0

    def test_empty_pool(self):
        with pytest.raises(EmptyPool):
            select_query_entropy(committee([Leaf(0)]), np.zeros((0, 2), dtype=np.uint8))

    @given(st.integers(0, 2**32 - 1))
    def test_is_argmax_with_lowest_tie(self, seed):
        rng = np.random.default_rng(seed)
        trees = [Node(int(rng.integers(3)), Leaf(int(rng.integers(2))), Leaf(int(rng.integers(2))))
                 for _ in range(4)]
        pool = rng.integers(0, 2, (12, 3)).astype(np.uint8)
        q = select_query_entropy(committee(trees), pool)
        assert q.index == int(np.flatnonzero(q.scores >= q.scores.max() - 1e-12)[0])


class TestUncertainty:
    tree = Node(0, Leaf(0), Leaf(1))

    def test_frequencies(self):
        X = np.array([[0], [0], [0], [1], [1]])
        y = np.array([0, 0, 1, 1, 1])
        ft = fit_leaf_frequencies(self.tree, X, y, 2)
        np.testing.assert_allclose(ft.frequencies, [[2 / 3, 1 / 3], [0, 1]])
        q = select_query_uncertainty(ft, np.array([[1], [0], [1]], dtype=np.uint8))
        assert q.index == 1 and q.score == pytest.approx(2 / 3)

    def test_pure_leaves_full_tie(self):
        ft = fit_leaf_frequencies(self.tree, np.array([[0], [1]]), np.array([0, 1]), 2)
        q = select_query_uncertainty(ft, np.array([[1], [0], [1]], dtype=np.uint8))
        assert q.index == 0 and q.tie_count == 3

    def test_empty_leaf_is_uniform(self):
        ft = fit_leaf_frequencies(self.tree, np.array([[0]]), np.array([0]), 2)
        assert ft.frequencies[1].tolist() == [0.5, 0.5]


class TestCoreset:
    def test_farthest_point(self):
        labeled = np.array([[0, 0, 0]], dtype=np.uint8)
        pool = np.array([[1, 0, 0], [1, 1, 1], [1, 1, 0]], dtype=np.uint8)
        q = select_query_coreset(labeled, pool)
        assert q.index == 1 and q.score == pytest.approx(np.sqrt(3))

    def test_duplicates_tie(self):
        X = np.array([[0, 1], [1, 0]], dtype=np.uint8)
        q = select_query_coreset(X, X.copy())
        assert q.index == 0 and q.score == 0.0

    @given(st.integers(0, 2**32 - 1))
    def test_matches_euclidean(self, seed):
        rng = np.random.default_rng(seed)
        L = rng.integers(0, 2, (6, 5)).astype(np.uint8)
        P = rng.integers(0, 2, (9, 5)).astype(np.uint8)
        q = select_query_coreset(L, P)
        d = np.sqrt(((P[:, None, :].astype(float) - L[None, :, :]) ** 2).sum(-1)).min(1)
        np.testing.assert_allclose(q.scores, d, atol=1e-12)


def test_random_in_range_and_seeded():
    a = [select_query_random(7, np.random.default_rng(3)).index for _ in range(3)]
    assert len(set(a)) == 1 and 0 <= a[0] < 7
    with pytest.raises(EmptyPool):
        select_query_random(0, np.random.default_rng(0))
