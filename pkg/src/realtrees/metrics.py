"""Learning-curve summaries and structural agreement metrics."""
from __future__ import annotations

import math

import numpy as np

from .errors import MilestoneUnreached, TruncationTooShort
from .tree import Tree, predict_rows

MILESTONES = (0.7, 0.8, 0.9)


def truncated_auc(trace, K: float = 0.7) -> float:
    """Trapezoidal area under the first ``floor(K * N)`` points of ``trace``."""
    A = np.asarray(trace, dtype=np.float64)
    if not 0 < K <= 1:
        raise ValueError("K must lie in (0, 1]")
    T = int(math.floor(K * len(A) + 1e-9))
    if T < 2:
        raise TruncationTooShort(f"K={K} keeps {T} of {len(A)} points; need at least 2")
    return float(((A[:T - 1] + A[1:T]) / 2.0).sum())


def efficiency_ratio(auc_m: float, auc_breal: float) -> float:
    if auc_breal == 0:
        raise ZeroDivisionError("reference AUC is zero")
    return auc_m / auc_breal


def labels_to_target(trace, target: float) -> int:
    """1-based position of the first point reaching ``target``."""
    A = np.asarray(trace, dtype=np.float64)
    hit = np.flatnonzero(A >= target - 1e-12)
    if len(hit) == 0:
        raise MilestoneUnreached(f"trace never reaches {target:.6g}")
    return int(hit[0]) + 1


def growth_target(trace, milestone: float) -> float:
    A = np.asarray(trace, dtype=np.float64)
    return A[0] + milestone * (A.max() - A[0])


def relative_label_efficiency(trace_m, trace_random, milestone: float = 0.7, ceiling: str = "own") -> float:
    """Labels needed by a method over labels needed by random sampling.

    ``ceiling="own"`` measures each trace against its own start and maximum;
    ``"shared"`` uses random sampling's target for both traces.
    """
    if len(trace_m) != len(trace_random):
        raise ValueError("traces must have equal length")
    t_r = growth_target(trace_random, milestone)
    t_m = growth_target(trace_m, milestone) if ceiling == "own" else t_r
    return labels_to_target(trace_m, t_m) / labels_to_target(trace_random, t_r)


def oracle_agreement(predictor: Tree, oracle_tree: Tree, test_X) -> float:
    test_X = np.asarray(test_X)
    if test_X.shape[0] == 0:
        return float("nan")
    return float(np.mean(predict_rows(predictor, test_X) == predict_rows(oracle_tree, test_X)))


def accuracy_trace(accuracy_history) -> np.ndarray:
    """Post-query accuracies: entry ``t`` (1-based) follows the ``t``-th label."""
    return np.asarray(accuracy_history[1:], dtype=np.float64)


def mean_trace(traces) -> tuple[np.ndarray, np.ndarray]:
    M = np.asarray(traces, dtype=np.float64)
    return M.mean(axis=0), M.std(axis=0)


def aggregate(traces_by_strategy: dict, K: float = 0.7, reference: str = "breal",
              baseline: str = "random", milestones=MILESTONES) -> list[dict]:
    """One summary row per strategy from per-seed accuracy traces.

    AUC is taken on the seed-mean trace; ``rho`` is relative to
    ``reference`` and ``nrel_*`` relative to ``baseline`` (NaN when absent).
    """
    means = {s: mean_trace(t)[0] for s, t in traces_by_strategy.items()}
    aucs = {s: truncated_auc(m, K) for s, m in means.items()}
    rows = []
    for s, m in means.items():
        row = {"strategy": s, "auc_k": aucs[s], "n_seeds": len(traces_by_strategy[s])}
        row["rho"] = efficiency_ratio(aucs[s], aucs[reference]) if reference in aucs else float("nan")
        for ms in milestones:
            key = f"nrel_{int(round(ms * 100))}"
            if baseline in means:
                try:
                    row[key] = relative_label_efficiency(m, means[baseline], ms)
                except MilestoneUnreached:
                    row[key] = float("nan")
            else:
                row[key] = float("nan")
        rows.append(row)
    return rows
