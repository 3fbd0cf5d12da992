"""Selector calibration on the pilot set and the active learning loop."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .committee import WeightedCommittee, Weighting, effective_committee_size, majority_labels, vote_entropy
from .data import Dataset, SplitSpec
from .errors import EmptyPool, EpsilonExhausted, NoPositives, StratificationInfeasible
from .forest import ForestConfig, train_forest
from .metrics import oracle_agreement
from .rashomon import DEFAULT_CAP, RashomonSet, SearchConfig, enumerate_rashomon, make_solver, optimal_tree
from .strategy import (
    QueryResult,
    StrategyKind,
    fit_leaf_frequencies,
    parse_strategy,
    select_query_coreset,
    select_query_entropy,
    select_query_random,
    select_query_uncertainty,
)
from .tree import Tree, predict_rows, to_text, tree_edit_distance

log = logging.getLogger(__name__)

DEPTH_GRID = (3, 5)
LAMBDA_GRID = (0.01, 0.001)
BETA_GRID = (1.0, 5.0, 10.0, 25.0, 50.0, 100.0, 250.0, 500.0)
EPSILON_STEP = 0.05
EPSILON_MAX = 1.0


# --------------------------------------------------------------- calibration


@dataclass(frozen=True)
class CalibrationResult:
    depth: int
    lam: float
    epsilon: float | None = None
    beta: float | None = None


def _check_pilot(pilot: Dataset):
    if pilot.n < 2 or len(np.unique(pilot.y)) < 2:
        raise StratificationInfeasible("pilot needs two rows and two classes for calibration")


def calibrate_structure(pilot: Dataset, depths=DEPTH_GRID, lambdas=LAMBDA_GRID, kernel=None):
    """Pick (depth, lambda) by leave-one-out error of the optimal tree.

    Ties go to the smaller depth, then the larger lambda.
    """
    _check_pilot(pilot)
    errors = {(d, lam): 0 for d in depths for lam in lambdas}
    everyone = np.arange(pilot.n)
    for i in range(pilot.n):
        train = pilot.subset(everyone[everyone != i])
        for lam in lambdas:
            solver = make_solver(train, lam, kernel)
            for d in depths:
                tree, _ = optimal_tree(train, SearchConfig(d, lam), solver=solver)
                errors[(d, lam)] += int(predict_rows(tree, pilot.X[i:i + 1])[0] != pilot.y[i])
    # equal n for every config, so integer counts order exactly like means
    best = min(errors, key=lambda dl: (errors[dl], dl[0], -dl[1]))
    log.debug("LOO errors %s -> %s", errors, best)
    return best


def _epsilon_search(pilot: Dataset, depth: int, lam: float, step=EPSILON_STEP, eps_max=EPSILON_MAX,
                    floor: int = 2, cap: int = DEFAULT_CAP, kernel=None):
    solver = make_solver(pilot, lam, kernel)
    k = 0
    while True:
        eps = round(k * step, 10)
        if eps > eps_max + 1e-12:
            raise EpsilonExhausted(f"fewer than {floor} trees even at epsilon={eps_max}")
        rset = enumerate_rashomon(pilot, SearchConfig(depth, lam, eps, cap), solver=solver)
        if len(rset) >= floor:
            return eps, rset
        k += 1


def calibrate_epsilon(pilot: Dataset, depth: int, lam: float, step=EPSILON_STEP, eps_max=EPSILON_MAX,
                      cap: int = DEFAULT_CAP, kernel=None) -> float:
    """Smallest multiple of ``step`` giving at least two Rashomon members."""
    return _epsilon_search(pilot, depth, lam, step, eps_max, cap=cap, kernel=kernel)[0]


def auprc(scores, positives) -> float:
    """Step-wise area under the precision-recall curve.

    Points are ranked by descending score; tied scores enter the curve as one
    block, so no ordering inside a tie is assumed.
    """
    s = np.asarray(scores, dtype=np.float64)
    pos = np.asarray(positives).astype(bool)
    if len(s) != len(pos):
        raise ValueError("scores and positives must align")
    n_pos = int(pos.sum())
    if n_pos == 0:
        raise NoPositives("precision-recall needs at least one positive")
    order = np.argsort(-s, kind="stable")
    s, pos = s[order], pos[order]
    # last index of each block of equal scores
    ends = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    tp = np.cumsum(pos)[ends]
    seen = ends + 1
    precision = tp / seen
    recall = tp / n_pos
    delta = np.diff(np.r_[0.0, recall])
    return float((precision * delta).sum())


def calibrate_beta(pilot: Dataset, rset: RashomonSet, grid=BETA_GRID) -> float:
    """Inverse temperature whose vote entropy best ranks the pilot errors."""
    if len(rset) == 0:
        raise ValueError("empty Rashomon set")
    losses = rset.values
    best_beta, best_score = None, -np.inf
    for beta in grid:
        committee = WeightedCommittee.build(rset.batch, losses, Weighting.GIBBS, beta, pilot.n_classes)
        P = committee.members.weighted_votes(committee.weights, pilot.X, pilot.n_classes)
        wrong = majority_labels(P) != pilot.y
        if not wrong.any():
            continue
        score = auprc(vote_entropy(P), wrong)
        if score > best_score:
            best_beta, best_score = beta, score
    return min(grid) if best_beta is None else best_beta


def calibrate(pilot: Dataset, kind: StrategyKind, cap: int = DEFAULT_CAP, depths=DEPTH_GRID,
              lambdas=LAMBDA_GRID, beta_grid=BETA_GRID, eps_step=EPSILON_STEP, eps_max=EPSILON_MAX,
              kernel=None) -> CalibrationResult | None:
    """Run the calibration stages ``kind`` needs; None for model-free strategies."""
    if not kind.needs_structure:
        return None
    depth, lam = calibrate_structure(pilot, depths, lambdas, kernel)
    if not kind.needs_epsilon:
        return CalibrationResult(depth, lam)
    eps, rset = _epsilon_search(pilot, depth, lam, eps_step, eps_max, cap=cap, kernel=kernel)
    beta = calibrate_beta(pilot, rset, beta_grid) if kind.needs_beta else None
    return CalibrationResult(depth, lam, eps, beta)


# ------------------------------------------------------------------ the loop


class HeldOutOracle:
    """Answers label queries from the dataset's stored labels."""

    def __init__(self, ds: Dataset):
        self._y = ds.y

    def label(self, index: int) -> int:
        return int(self._y[index])


@dataclass(frozen=True)
class LoopConfig:
    budget: int
    strategy: str = "breal"
    predictor_depth: int = 5
    predictor_lambda: float = 0.001
    seed: int | tuple = 0
    depth_grid: tuple = DEPTH_GRID
    lambda_grid: tuple = LAMBDA_GRID
    beta_grid: tuple = BETA_GRID
    epsilon_step: float = EPSILON_STEP
    epsilon_max: float = EPSILON_MAX
    set_size_cap: int = DEFAULT_CAP
    n_trees: int = 100
    keep_committees: bool = False
    kernel: str | None = None


@dataclass
class RunHistory:
    strategy: str
    calibration: CalibrationResult | None
    accuracy: list = field(default_factory=list)
    set_size: list = field(default_factory=list)
    ecs: list = field(default_factory=list)
    selector_objective: list = field(default_factory=list)
    queried: list = field(default_factory=list)
    scores: list = field(default_factory=list)
    predictors: list = field(default_factory=list)  # canonical text per iteration
    oracle_agreement: list = field(default_factory=list)
    tree_edit_distance: list = field(default_factory=list)
    initial_labeled: list = field(default_factory=list)
    committees: list = field(default_factory=list)  # only with keep_committees

    def labeled_at(self, t: int) -> list[int]:
        """Dataset row indices labelled at iteration ``t``."""
        return list(self.initial_labeled) + [q for q in self.queried[:t]]

    def to_dict(self) -> dict:
        calib = None if self.calibration is None else vars(self.calibration).copy()
        return {
            "strategy": self.strategy,
            "calibration": calib,
            "accuracy": self.accuracy,
            "set_size": self.set_size,
            "ecs": self.ecs,
            "selector_objective": self.selector_objective,
            "queried": self.queried,
            "scores": self.scores,
            "predictors": self.predictors,
            "oracle_agreement": self.oracle_agreement,
            "tree_edit_distance": self.tree_edit_distance,
            "initial_labeled": self.initial_labeled,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunHistory":
        calib = d.get("calibration")
        h = cls(d["strategy"], None if calib is None else CalibrationResult(**calib))
        for key in ("accuracy", "set_size", "ecs", "selector_objective", "queried", "scores",
                    "predictors", "oracle_agreement", "tree_edit_distance", "initial_labeled"):
            setattr(h, key, list(d.get(key, [])))
        return h


def _committee_query(kind, cal, cfg, cur: Dataset, pool_X, it: int):
    """Build the committee for this iteration and pick the entropy maximiser."""
    if kind.family == "real":
        rset = enumerate_rashomon(cur, SearchConfig(cal.depth, cal.lam, cal.epsilon, cfg.set_size_cap),
                                  kernel=cfg.kernel)
        members, losses, opt = rset.batch, rset.values, rset.optimum
    else:
        fcfg = ForestConfig(cfg.n_trees, kind.subset_mode, cal.depth, seed=_mix(cfg.seed, it))
        members, losses = train_forest(cur, fcfg, cal.lam)
        rset, opt = None, float("nan")
    beta = cal.beta if kind.weighting is Weighting.GIBBS else 0.0
    committee = WeightedCommittee.build(members, losses, kind.weighting, beta, cur.n_classes)
    q = select_query_entropy(committee, pool_X)
    return q, committee, rset, opt


def _mix(seed, it: int) -> list[int]:
    base = list(seed) if isinstance(seed, (tuple, list)) else [int(seed)]
    return base + [1000003, it]


def run_active_learning(ds: Dataset, split: SplitSpec, cfg: LoopConfig, oracle=None,
                        oracle_tree: Tree | None = None) -> RunHistory:
    """Pool-based active learning with one query per iteration.

    The Selector is calibrated once on the pilot set. At every iteration the
    Predictor (an optimal tree with the predictor depth and lambda) is refit
    on the labelled set and scored on the held-out test rows.
    """
    kind = parse_strategy(cfg.strategy)
    oracle = oracle or HeldOutOracle(ds)
    pool = [int(i) for i in split.pool_indices]
    if not 0 <= cfg.budget <= len(pool):
        raise ValueError(f"budget {cfg.budget} outside [0, {len(pool)}]")
    labeled = [int(i) for i in split.initial_labeled_indices]
    y_lab = [oracle.label(i) for i in labeled]
    test = ds.subset(split.test_indices)
    rng = np.random.default_rng(cfg.seed)

    def current() -> Dataset:
        return Dataset(ds.X[labeled], np.array(y_lab, dtype=np.int64), ds.feature_names, ds.classes, ds.name)

    cal = calibrate(current(), kind, cfg.set_size_cap, cfg.depth_grid, cfg.lambda_grid, cfg.beta_grid,
                    cfg.epsilon_step, cfg.epsilon_max, cfg.kernel)
    hist = RunHistory(cfg.strategy, cal, initial_labeled=list(labeled))

    for it in range(cfg.budget + 1):
        cur = current()
        predictor, _ = optimal_tree(cur, SearchConfig(cfg.predictor_depth, cfg.predictor_lambda),
                                    kernel=cfg.kernel)
        hist.accuracy.append(float(np.mean(predict_rows(predictor, test.X) == test.y)) if test.n else float("nan"))
        hist.predictors.append(to_text(predictor))
        if oracle_tree is not None:
            hist.oracle_agreement.append(oracle_agreement(predictor, oracle_tree, test.X))
            hist.tree_edit_distance.append(tree_edit_distance(predictor, oracle_tree))
        if it == cfg.budget:
            hist.set_size.append(None)
            hist.ecs.append(None)
            hist.selector_objective.append(None)
            break
        if not pool:
            raise EmptyPool("pool exhausted before the budget")
        pool_X = ds.X[pool]

        size = ecs = obj = None
        if kind.uses_committee:
            q, committee, rset, opt = _committee_query(kind, cal, cfg, cur, pool_X, it)
            size, ecs = len(committee), effective_committee_size(committee.weights)
            obj = opt if kind.family == "real" else None
            if cfg.keep_committees and rset is not None:
                hist.committees.append(rset)
        elif kind.family == "uncertainty":
            tree, rec = optimal_tree(cur, SearchConfig(cal.depth, cal.lam), kernel=cfg.kernel)
            q = select_query_uncertainty(fit_leaf_frequencies(tree, cur.X, cur.y, cur.n_classes), pool_X)
            obj = rec.value
        elif kind.family == "coreset":
            q = select_query_coreset(cur.X, pool_X)
        else:
            q = select_query_random(len(pool), rng)

        hist.set_size.append(size)
        hist.ecs.append(ecs)
        hist.selector_objective.append(obj)
        row = pool.pop(q.index)
        hist.queried.append(row)
        hist.scores.append(q.score)
        labeled.append(row)
        y_lab.append(oracle.label(row))
    return hist
