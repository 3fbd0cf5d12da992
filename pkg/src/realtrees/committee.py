"""Gibbs / uniform committee weighting, weighted votes and committee diagnostics."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .tree import TreeBatch


class Weighting(str, Enum):
    GIBBS = "gibbs"
    UNIFORM = "uniform"


def compute_weights(losses, mode: Weighting | str = Weighting.GIBBS, beta: float = 1.0) -> np.ndarray:
    """Normalised member weights.

    Gibbs weights are ``exp(-beta * loss)`` normalised; the smallest loss is
    subtracted first so the largest term is exactly 1.
    """
    losses = np.asarray(losses, dtype=np.float64)
    if losses.ndim != 1 or len(losses) == 0:
        raise ValueError("need a non-empty 1-d array of losses")
    if not np.isfinite(losses).all():
        raise ValueError("losses must be finite")
    if beta < 0:
        raise ValueError("beta must be >= 0")
    mode = Weighting(mode)
    if mode is Weighting.UNIFORM:
        return np.full(len(losses), 1.0 / len(losses))
    w = np.exp(-beta * (losses - losses.min()))
    return w / w.sum()


@dataclass(frozen=True, eq=False)
class WeightedCommittee:
    members: TreeBatch
    losses: np.ndarray
    weights: np.ndarray
    mode: Weighting
    beta: float
    n_classes: int = 2

    @classmethod
    def build(cls, members: TreeBatch, losses, mode=Weighting.GIBBS, beta: float = 1.0,
              n_classes: int = 2) -> "WeightedCommittee":
        losses = np.asarray(losses, dtype=np.float64)
        if len(losses) != len(members) or len(members) == 0:
            raise ValueError("need one loss per member and at least one member")
        mode = Weighting(mode)
        return cls(members, losses, compute_weights(losses, mode, beta), mode, beta, n_classes)

    def __len__(self) -> int:
        return len(self.members)


def vote_distributions(committee: WeightedCommittee, X) -> np.ndarray:
    """P(y | x) for every row of ``X`` as an (n_rows, n_classes) array."""
    X = np.atleast_2d(np.asarray(X, dtype=np.uint8))
    return committee.members.weighted_votes(committee.weights, X, committee.n_classes)


def vote_distribution(committee: WeightedCommittee, x) -> np.ndarray:
    return vote_distributions(committee, np.asarray(x, dtype=np.uint8)[None, :])[0]


def vote_entropy(dist) -> float | np.ndarray:
    """Shannon entropy in nats; accepts one distribution or a stack of them."""
    P = np.asarray(dist, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(P > 0, P * np.log(np.where(P > 0, P, 1.0)), 0.0)
    H = -terms.sum(axis=-1)
    H = np.maximum(H, 0.0)
    return float(H) if H.ndim == 0 else H


def effective_committee_size(weights) -> float:
    w = np.asarray(weights, dtype=np.float64)
    nz = w[w > 0]
    return float(np.exp(-(nz * np.log(nz)).sum()))


def majority_labels(P: np.ndarray) -> np.ndarray:
    """Weighted-majority label per row; ties go to the smallest label."""
    return np.argmax(P, axis=1)
