"""Rashomon-set committees for pool-based active learning with sparse trees."""
__version__ = "0.1.0"

from .alloop import (
    CalibrationResult,
    HeldOutOracle,
    LoopConfig,
    RunHistory,
    auprc,
    calibrate_beta,
    calibrate_epsilon,
    calibrate_structure,
    run_active_learning,
)
from .committee import (
    WeightedCommittee,
    Weighting,
    compute_weights,
    effective_committee_size,
    vote_distribution,
    vote_entropy,
)
from .data import (
    Dataset,
    SplitSpec,
    SyntheticConfig,
    apply_label_noise,
    binarize,
    gen_parity,
    gen_xor_mixture,
    load_csv,
    split_dataset,
)
from .forest import ForestConfig, train_forest
from .kernels import backend
from .metrics import efficiency_ratio, oracle_agreement, relative_label_efficiency, truncated_auc
from .rashomon import RashomonSet, SearchConfig, enumerate_rashomon, optimal_tree
from .tree import Leaf, Node, ObjectiveRecord, canonical_key, objective, predict, tree_edit_distance

