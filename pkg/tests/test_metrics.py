import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from realtrees.errors import MilestoneUnreached, TruncationTooShort
from realtrees.metrics import (
    accuracy_trace,
    aggregate,
    efficiency_ratio,
    mean_trace,
    oracle_agreement,
    relative_label_efficiency,
    truncated_auc,
)
from realtrees.tree import Leaf, Node

traces = st.lists(st.floats(0, 1), min_size=4, max_size=60)


class TestTruncatedAuc:
    def test_three_points(self):
        assert truncated_auc((0.5, 0.7, 0.9), K=1.0) == 1.4

    def test_constant(self):
        assert truncated_auc([0.25] * 9, K=1.0) == pytest.approx(0.25 * 8)

    def test_truncation_index(self):
        # N=10, K=0.7 keeps 7 points, i.e. six trapezoids
        assert truncated_auc(np.arange(10.0), 0.7) == pytest.approx(sum((t + t + 1) / 2 for t in range(6)))

    def test_too_short(self):
        with pytest.raises(TruncationTooShort):
            truncated_auc([0.5, 0.6], 0.7)

    @given(traces, st.floats(0, 0.3), st.sampled_from([0.5, 0.7, 1.0]))
    def test_monotone(self, trace, bump, K):
        hi = np.minimum(np.array(trace) + bump, 1.0)
        if int(np.floor(K * len(trace) + 1e-9)) < 2:
            return
        assert truncated_auc(hi, K) >= truncated_auc(trace, K) - 1e-12


class TestRatios:
    def test_identity(self):
        assert efficiency_ratio(1.4, 1.4) == 1.0

    def test_arithmetic(self):
        assert efficiency_ratio(1.26, 1.4) == pytest.approx(0.9)

    def test_zero_reference(self):
        with pytest.raises(ZeroDivisionError):
            efficiency_ratio(1.0, 0.0)

    @given(traces, st.sampled_from([0.7, 0.8, 0.9]))
    def test_nrel_self(self, trace, m):
        assert relative_label_efficiency(trace, trace, m) == 1.0

    def test_nrel_half(self):
        method = np.r_[0.5, np.linspace(0.5, 1.0, 50), np.ones(99)]
        rand = np.linspace(0.5, 1.0, 150)
        # method reaches 0.85 (70% of the growth) well before random
        assert relative_label_efficiency(method, rand, 0.7) < 1.0

    def test_nrel_ratio_exact(self):
        method = np.zeros(100)
        method[49:] = 1.0
        rand = np.zeros(100)
        rand[99] = 1.0
        assert relative_label_efficiency(method, rand, 0.7) == 0.5

    def test_nrel_shared_ceiling(self):
        method = np.r_[np.zeros(5), np.full(5, 0.5)]
        rand = np.r_[np.zeros(9), 1.0]
        assert relative_label_efficiency(method, rand, 0.7, "own") == 0.6
        with pytest.raises(MilestoneUnreached):
            relative_label_efficiency(method, rand, 0.7, "shared")


def test_oracle_agreement():
    X = np.array([[0, 0], [0, 1], [1, 0], [1, 1]])
    a = Node(0, Leaf(0), Leaf(1))
    assert oracle_agreement(a, a, X) == 1.0
    assert oracle_agreement(a, Node(1, Leaf(0), Leaf(1)), X) == 0.5
    assert oracle_agreement(Leaf(1), Leaf(1), X) == 1.0


def test_accuracy_trace_drops_pilot_point():
    assert accuracy_trace([0.1, 0.2, 0.3]).tolist() == [0.2, 0.3]


def test_mean_trace_by_hand():
    m, s = mean_trace([[0.2, 0.4], [0.4, 0.4], [0.6, 0.7]])
    np.testing.assert_allclose(m, [0.4, 0.5])
    np.testing.assert_allclose(s, [np.std([0.2, 0.4, 0.6]), np.std([0.4, 0.4, 0.7])])


def test_aggregate_rows():
    seeds = [[0.5, 0.6, 0.8, 0.9], [0.5, 0.7, 0.8, 0.9], [0.4, 0.6, 0.8, 1.0]]
    rand = [[0.5, 0.5, 0.6, 0.9], [0.5, 0.6, 0.6, 0.8], [0.5, 0.5, 0.7, 0.9]]
    rows = {r["strategy"]: r for r in aggregate({"breal": seeds, "random": rand}, K=1.0)}
    mean_b = np.mean(seeds, axis=0)
    assert rows["breal"]["auc_k"] == pytest.approx(truncated_auc(mean_b, 1.0))
    assert rows["breal"]["rho"] == 1.0
    assert rows["random"]["rho"] == pytest.approx(rows["random"]["auc_k"] / rows["breal"]["auc_k"])
    assert rows["random"]["nrel_70"] == 1.0
    assert rows["breal"]["n_seeds"] == 3


def test_aggregate_without_reference():
    rows = aggregate({"random": [[0.1, 0.2, 0.3]]}, K=1.0)
    assert np.isnan(rows[0]["rho"])
