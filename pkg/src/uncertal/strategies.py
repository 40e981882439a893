"""Query strategies over a labeled/unlabeled pool.

Retraining-based selection scores every pool candidate x by hypothesizing
each label y, refitting the classifier on the enlarged labeled set, and
evaluating a criterion V(x, y):

* ``eer_logloss``: summed posterior entropy of the refit model over the
  remaining pool (proxy for generalization error);
* ``mli``: the refit model's own (optionally regularized) training loss.

The per-label scores are then collapsed by an aggregation mode and the
candidate with the smallest aggregate wins:

* ``average``               sum_y P(y|x) V(x, y)
* ``worst``                 max_y V(x, y)
* ``best``                  min_y V(x, y)
* ``uncertainty_weighted``  max_y P(y|x) V(x, y)

where P(y|x) comes from the model trained on the current labeled set
before any hypothesized addition. ``random`` and ``uncertainty`` selectors
skip the retraining loop entirely.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import model as model_mod
from ._backend import kernels
from .data import Dataset, PoolState
from .model import Model, TrainConfig

CRITERIA = ("none", "eer_logloss", "mli")
AGGREGATIONS = ("average", "worst", "best", "uncertainty_weighted")
SELECTOR_KINDS = ("random", "uncertainty", "retraining")

# Scores are rounded to this many decimals before the argmin so that ties
# break on the smallest pool index identically across platforms/backends.
SCORE_DECIMALS = 9


@dataclass(frozen=True)
class StrategySpec:
    """Base criterion x aggregation mode x selector kind."""

    criterion: str = "none"
    aggregation: str = "average"
    include_regularizer: bool = True
    selector_kind: str = "retraining"

    def __post_init__(self):
        if self.criterion not in CRITERIA:
            raise ValueError(f"unknown criterion {self.criterion!r}")
        if self.aggregation not in AGGREGATIONS:
            raise ValueError(f"unknown aggregation {self.aggregation!r}")
        if self.selector_kind not in SELECTOR_KINDS:
            raise ValueError(f"unknown selector kind {self.selector_kind!r}")
        if (self.selector_kind == "retraining") != (self.criterion != "none"):
            raise ValueError(
                "retraining selectors require a criterion and vice versa")


# Named strategies accepted on the command line.
REGISTRY: dict[str, StrategySpec] = {
    "random": StrategySpec(criterion="none", selector_kind="random"),
    "uncertainty": StrategySpec(criterion="none", selector_kind="uncertainty"),
    "eer": StrategySpec(criterion="eer_logloss", aggregation="average"),
    "ueer": StrategySpec(criterion="eer_logloss",
                         aggregation="uncertainty_weighted"),
    "eer-worst": StrategySpec(criterion="eer_logloss", aggregation="worst"),
    "mli": StrategySpec(criterion="mli", aggregation="worst",
                        include_regularizer=True),
    "umli": StrategySpec(criterion="mli", aggregation="uncertainty_weighted",
                         include_regularizer=False),
    "mli-avg": StrategySpec(criterion="mli", aggregation="average",
                            include_regularizer=True),
}


def get_strategy(name: str) -> StrategySpec:
    try:
        return REGISTRY[name]
    except KeyError:
        raise ValueError(
            f"unknown strategy {name!r}; known: {', '.join(REGISTRY)}") from None


@dataclass(frozen=True)
class CandidateScore:
    """Scores for one pool candidate; label order is (+1, -1)."""

    pool_index: int
    per_label_v: tuple[float, float]
    per_label_posterior: tuple[float, float]
    aggregated: float


@dataclass(frozen=True)
class ScoreTable:
    """Vectorized score table over the unlabeled pool (label order +1, -1)."""

    pool_indices: np.ndarray   # (u,) dataset indices, ascending
    v: np.ndarray              # (u, 2) criterion values
    p_positive: np.ndarray     # (u,) base-model P(+1|x)
    aggregated: np.ndarray     # (u,)
    nonconverged: int          # refits that missed the gradient tolerance

    def rows(self) -> list[CandidateScore]:
        return [
            CandidateScore(
                pool_index=int(self.pool_indices[j]),
                per_label_v=(float(self.v[j, 0]), float(self.v[j, 1])),
                per_label_posterior=(float(self.p_positive[j]),
                                     float(1.0 - self.p_positive[j])),
                aggregated=float(self.aggregated[j]),
            )
            for j in range(len(self.pool_indices))
        ]

    def argmin_index(self) -> int:
        """Selected dataset index: argmin with smallest-index tie-breaking."""
        rounded = np.round(self.aggregated, SCORE_DECIMALS)
        return int(self.pool_indices[int(np.argmin(rounded))])


def aggregate(posteriors, v, mode: str) -> float:
    """Collapse per-label scores to one number; see the module docstring."""
    p_pos, p_neg = posteriors
    v_pos, v_neg = v
    if mode == "average":
        return p_pos * v_pos + p_neg * v_neg
    if mode == "worst":
        return max(v_pos, v_neg)
    if mode == "best":
        return min(v_pos, v_neg)
    if mode == "uncertainty_weighted":
        return max(p_pos * v_pos, p_neg * v_neg)
    raise ValueError(f"unknown aggregation {mode!r}")


def _features(data) -> np.ndarray:
    X = data.features if isinstance(data, Dataset) else data
    return np.asarray(X, dtype=np.float64)


def v_eer(pool: PoolState, model_lplus: Model, candidate: int, data,
          include_candidate: bool = False) -> float:
    """Summed posterior entropy of ``model_lplus`` over the unlabeled pool.

    The candidate itself is excluded by default since it is the instance
    about to leave the pool.
    """
    idx = pool.unlabeled
    if not include_candidate:
        idx = idx[idx != candidate]
    if len(idx) == 0:
        return 0.0
    Xa = model_mod.augment(_features(data)[idx])
    return float(kernels.entropy_sum(Xa, model_lplus.weights))


def v_mli(model_lplus: Model, X_lplus, y_lplus,
          include_regularizer: bool = True) -> float:
    """Training loss of the refit model on its own enlarged labeled set."""
    return model_mod.objective_value(model_lplus, X_lplus, y_lplus,
                                     include_regularizer)


def compute_scores(spec: StrategySpec, pool: PoolState, X, y,
                   base_model: Model, cfg: TrainConfig,
                   include_candidate: bool = False,
                   warm: bool = True) -> ScoreTable:
    """Score every unlabeled candidate under ``spec``.

    For retraining selectors this runs the full double loop (one refit per
    candidate and hypothesized label, warm-started from ``base_model``
    unless ``warm`` is off). For ``random``/``uncertainty`` the V column is
    the constant 1 and only base-model posteriors are computed.
    """
    if len(pool.unlabeled) == 0:
        raise ValueError("unlabeled pool is empty")
    X = _features(X)
    y = np.asarray(y, dtype=np.float64)
    idx = pool.unlabeled
    # the published posterior column goes through the same per-row path as
    # posterior(), so single-point and batch evaluation agree bit for bit
    p_pos = model_mod.posterior_positive(base_model, X[idx])
    if spec.selector_kind == "retraining":
        crit = (kernels.CRITERION_EER if spec.criterion == "eer_logloss"
                else kernels.CRITERION_MLI)
        XaL = model_mod.augment(X[pool.labeled])
        XaU = model_mod.augment(X[idx])
        v, _, nonconverged = kernels.score_retraining(
            XaL, y[pool.labeled], XaU, base_model.weights, cfg.lam,
            cfg.grad_tol, cfg.max_iter, crit, spec.include_regularizer,
            include_candidate, warm)
    else:
        v = np.ones((len(idx), 2), dtype=np.float64)
        nonconverged = 0
    p_neg = 1.0 - p_pos
    if spec.selector_kind == "uncertainty":
        agg = np.maximum(p_pos, p_neg)
    elif spec.aggregation == "average":
        agg = p_pos * v[:, 0] + p_neg * v[:, 1]
    elif spec.aggregation == "worst":
        agg = np.maximum(v[:, 0], v[:, 1])
    elif spec.aggregation == "best":
        agg = np.minimum(v[:, 0], v[:, 1])
    else:
        agg = np.maximum(p_pos * v[:, 0], p_neg * v[:, 1])
    return ScoreTable(pool_indices=idx.copy(), v=v, p_positive=p_pos,
                      aggregated=agg, nonconverged=int(nonconverged))


def score_all(spec: StrategySpec, pool: PoolState, X, y, base_model: Model,
              cfg: TrainConfig, include_candidate: bool = False,
              warm: bool = True) -> list[CandidateScore]:
    """Full score table over the unlabeled pool, one row per candidate."""
    return compute_scores(spec, pool, X, y, base_model, cfg,
                          include_candidate, warm).rows()


def select(spec: StrategySpec, pool: PoolState, X, y, base_model: Model,
           rng: np.random.Generator | None, cfg: TrainConfig,
           include_candidate: bool = False, warm: bool = True) -> int:
    """Pick the next pool index to query under ``spec``.

    Definitionally the argmin of the aggregated column of the score table
    for the deterministic selectors; ``random`` draws uniformly instead.
    """
    if len(pool.unlabeled) == 0:
        raise ValueError("unlabeled pool is empty")
    if spec.selector_kind == "random":
        if rng is None:
            raise ValueError("the random selector needs an rng")
        return int(pool.unlabeled[rng.integers(len(pool.unlabeled))])
    table = compute_scores(spec, pool, X, y, base_model, cfg,
                           include_candidate, warm)
    return table.argmin_index()
