import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from realtrees.committee import (
    WeightedCommittee,
    Weighting,
    compute_weights,
    effective_committee_size,
    majority_labels,
    vote_distribution,
    vote_distributions,
    vote_entropy,
)
from realtrees.tree import Leaf, Node, TreeBatch

losses_st = st.lists(st.floats(0, 5, allow_nan=False), min_size=1, max_size=40)


class TestWeights:
    def test_uniform(self):
        assert compute_weights([0.1, 0.2, 0.9], "uniform").tolist() == [1 / 3] * 3

    def test_beta_zero_is_uniform_exactly(self):
        w = compute_weights([0.1, 0.2, 0.9, 0.05], Weighting.GIBBS, 0.0)
        assert w.tolist() == [0.25] * 4

    def test_gibbs_ratio(self):
        w = compute_weights([0.0, 0.1], Weighting.GIBBS, 10.0)
        assert w[1] / w[0] == pytest.approx(math.exp(-1.0), rel=1e-12)

    def test_large_beta_does_not_underflow_to_nan(self):
        w = compute_weights([1000.0, 1000.5], Weighting.GIBBS, 500.0)
        assert np.isfinite(w).all() and w[0] == pytest.approx(1.0)

    @given(losses_st, st.sampled_from([0.0, 1.0, 5.0, 50.0, 500.0]))
    def test_normalised(self, losses, beta):
        w = compute_weights(losses, Weighting.GIBBS, beta)
        assert abs(w.sum() - 1.0) <= 1e-9
        assert (w >= 0).all()

    @given(losses_st, st.floats(-10, 10), st.sampled_from([1.0, 25.0, 500.0]))
    def test_shift_invariant(self, losses, shift, beta):
        a = compute_weights(losses, Weighting.GIBBS, beta)
        b = compute_weights(np.array(losses) + shift, Weighting.GIBBS, beta)
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)

    @pytest.mark.parametrize("bad", [[], [float("nan")], [float("inf")]])
    def test_rejects_bad_losses(self, bad):
        with pytest.raises(ValueError):
            compute_weights(bad)

    def test_rejects_negative_beta(self):
        with pytest.raises(ValueError):
            compute_weights([0.1], beta=-1)


class TestEcs:
    @pytest.mark.parametrize("k", [1, 2, 10, 1000])
    def test_uniform_gives_k(self, k):
        assert abs(effective_committee_size(np.full(k, 1 / k)) - k) <= 1e-9

    def test_collapsed(self):
        assert effective_committee_size([1.0, 0.0, 0.0]) == 1.0

    @given(losses_st, st.sampled_from([1.0, 50.0, 500.0]))
    def test_bounds(self, losses, beta):
        ecs = effective_committee_size(compute_weights(losses, Weighting.GIBBS, beta))
        assert 1 - 1e-9 <= ecs <= len(losses) + 1e-9


class TestVotes:
    members = TreeBatch.from_trees([Node(0, Leaf(0), Leaf(1)), Node(1, Leaf(0), Leaf(1)), Leaf(1)])

    def test_distribution_and_entropy(self):
        c = WeightedCommittee.build(self.members, [0.0, 0.0, 0.0], Weighting.UNIFORM)
        P = vote_distributions(c, np.array([[0, 0], [1, 0], [1, 1]], dtype=np.uint8))
        np.testing.assert_allclose(P, [[2 / 3, 1 / 3], [1 / 3, 2 / 3], [0, 1]])
        H = vote_entropy(P)
        assert H[2] == 0.0
        assert H[0] == pytest.approx(-(2 / 3) * math.log(2 / 3) - (1 / 3) * math.log(1 / 3))

    def test_single_row(self):
        c = WeightedCommittee.build(self.members, [0.0, 0.0, 0.0], Weighting.UNIFORM)
        assert vote_distribution(c, [1, 1]).tolist() == [0.0, 1.0]

    def test_entropy_of_even_split_is_log2(self):
        assert vote_entropy([0.5, 0.5]) == pytest.approx(math.log(2))
        assert vote_entropy([1.0, 0.0]) == 0.0

    def test_gibbs_favours_low_loss(self):
        c = WeightedCommittee.build(self.members, [0.0, 1.0, 1.0], Weighting.GIBBS, beta=100.0)
        assert majority_labels(vote_distributions(c, np.array([[0, 1]], dtype=np.uint8))).tolist() == [0]

    def test_majority_tie_smallest_label(self):
        assert majority_labels(np.array([[0.5, 0.5]])).tolist() == [0]

    def test_build_checks_lengths(self):
        with pytest.raises(ValueError):
            WeightedCommittee.build(self.members, [0.0, 1.0])

    @given(st.lists(st.floats(0, 1), min_size=3, max_size=3), st.integers(0, 2**32 - 1))
    def test_distributions_sum_to_one(self, losses, seed):
        X = np.random.default_rng(seed).integers(0, 2, (8, 2)).astype(np.uint8)
        c = WeightedCommittee.build(self.members, losses, Weighting.GIBBS, 5.0)
        np.testing.assert_allclose(vote_distributions(c, X).sum(axis=1), 1.0, atol=1e-12)
