"""Retraining-based active learning with uncertainty-weighted selection.

Query strategies (random, uncertainty, eer, ueer, eer-worst, mli, umli,
mli-avg) over an L2-regularized logistic regression, plus the simulated-
oracle benchmark protocol: learning curves, ALC, paired t-tests and
win/tie/loss comparison across datasets.
"""

__version__ = "0.1.0"

from ._backend import backend_name
from .data import (Dataset, PoolState, Standardizer, SyntheticSpec, load,
                   load_bundled, make_synthetic, split_and_seed, standardize,
                   substream)
from .experiment import (ComparisonTable, DatasetRef, ExperimentConfig,
                         LearningCurve, TrialResult, alc, build_table,
                         paired_t_test, run_experiment, run_trial)
from .model import Model, TrainConfig, gradient, objective_value, posterior, train
from .strategies import (REGISTRY, CandidateScore, StrategySpec, aggregate,
                         get_strategy, score_all, select, v_eer, v_mli)

__all__ = [
    "__version__", "backend_name",
    "Dataset", "PoolState", "Standardizer", "SyntheticSpec", "load",
    "load_bundled", "make_synthetic", "split_and_seed", "standardize",
    "substream",
    "ComparisonTable", "DatasetRef", "ExperimentConfig", "LearningCurve",
    "TrialResult", "alc", "build_table", "paired_t_test", "run_experiment",
    "run_trial",
    "Model", "TrainConfig", "gradient", "objective_value", "posterior",
    "train",
    "REGISTRY", "CandidateScore", "StrategySpec", "aggregate", "get_strategy",
    "score_all", "select", "v_eer", "v_mli",
]
