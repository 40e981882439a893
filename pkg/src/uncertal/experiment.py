"""Benchmark protocol: trials, learning curves, ALC, and strategy comparison.

Each trial splits a dataset into equal train/test halves, seeds the labeled
set with one random instance per class, then repeatedly queries the pool
with a strategy, retrains, and records test accuracy. The curve includes
the seed model (step 0), so a budget of b yields b+1 accuracies; ALC is
their mean. All randomness flows through named substreams of the base
seed: the split stream depends only on (dataset, trial) so every strategy
sees identical splits and seeds, which is what makes the per-dataset
paired t-tests between strategies valid pairings.
"""

from __future__ import annotations

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.special import betainc

from . import model as model_mod
from . import strategies as strat_mod
from .data import (Dataset, SyntheticSpec, load, load_bundled,
                   make_synthetic, split_and_seed, standardize, substream)
from .model import TrainConfig

THREADS_ENV = "UNCERTAL_THREADS"


@dataclass(frozen=True)
class DatasetRef:
    """A dataset by bundled name, file path, or synthetic generator spec."""

    name: str
    path: str | None = None
    fmt: str | None = None
    synthetic: SyntheticSpec | None = None

    def load(self) -> Dataset:
        if self.synthetic is not None:
            return make_synthetic(self.synthetic, name=self.name)
        if self.path is not None:
            return load(self.path, self.fmt or "csv", name=self.name)
        return load_bundled(self.name)


@dataclass(frozen=True)
class ExperimentConfig:
    datasets: tuple[DatasetRef, ...]
    strategies: tuple[str, ...]
    trials: int = 20
    budget: int | str | None = None  # None -> min(100, pool); "full" -> pool
    lam: float = 100.0
    base_seed: int = 0
    significance: float = 0.05

    def __post_init__(self):
        if not self.datasets:
            raise ValueError("at least one dataset is required")
        if not self.strategies:
            raise ValueError("at least one strategy is required")
        for name in self.strategies:
            strat_mod.get_strategy(name)
        if self.trials < 2:
            raise ValueError("trials must be at least 2 (paired tests)")
        if isinstance(self.budget, str) and self.budget != "full":
            raise ValueError("budget must be an integer or 'full'")
        if isinstance(self.budget, int) and self.budget < 1:
            raise ValueError("budget must be at least 1")
        if not 0.0 < self.significance < 1.0:
            raise ValueError("significance must lie in (0, 1)")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")


@dataclass(frozen=True)
class LearningCurve:
    """Test accuracy after 0..budget queries."""

    accuracies: np.ndarray

    def __post_init__(self):
        acc = np.asarray(self.accuracies, dtype=np.float64)
        if acc.ndim != 1 or acc.shape[0] == 0:
            raise ValueError("curve must be a non-empty vector")
        if np.any(acc < 0.0) or np.any(acc > 1.0):
            raise ValueError("accuracies must lie in [0, 1]")
        object.__setattr__(self, "accuracies", acc)


def alc(curve: LearningCurve) -> float:
    """Area under the learning curve: the mean accuracy over all steps."""
    return float(np.mean(curve.accuracies))


@dataclass(frozen=True)
class TrialResult:
    dataset: str
    strategy: str
    trial: int
    curve: LearningCurve
    alc: float
    selected_indices: tuple[int, ...]
    nonconverged: int = 0
    test_indices: tuple[int, ...] = field(default=(), repr=False)


def resolve_budget(budget: int | str | None, pool_size: int,
                   quiet: bool = False) -> int:
    if budget == "full":
        return pool_size
    if budget is None:
        return min(100, pool_size)
    if budget > pool_size:
        if not quiet:
            warnings.warn(
                f"budget {budget} exceeds the initial pool ({pool_size}); "
                "clipping", stacklevel=2)
        return pool_size
    return int(budget)


Recorder = Callable[[int, strat_mod.ScoreTable | None, int], None]


def run_trial(ds: Dataset, strategy: str, cfg: ExperimentConfig,
              trial_idx: int, recorder: Recorder | None = None) -> TrialResult:
    """One active-learning run of ``strategy`` on ``ds``.

    Deterministic given (cfg.base_seed, ds.name, strategy, trial_idx). The
    optional ``recorder(step, score_table, chosen)`` hook sees the score
    table of every query step (None for the random selector) and feeds the
    selection-trace export.
    """
    spec = strat_mod.get_strategy(strategy)
    split_rng = substream(cfg.base_seed, "split", ds.name, trial_idx)
    pool = split_and_seed(ds, split_rng)
    st, _ = standardize(ds.features[pool.train_indices])
    X = st.transform(ds.features)
    y = ds.labels.astype(np.float64)
    budget = resolve_budget(cfg.budget, len(pool.unlabeled))
    query_rng = substream(cfg.base_seed, "query", ds.name, strategy, trial_idx)
    tc = TrainConfig(lam=cfg.lam)

    nonconverged = 0
    m = model_mod.train(X[pool.labeled], y[pool.labeled], tc)
    nonconverged += 0 if m.converged else 1
    accs = np.empty(budget + 1, dtype=np.float64)
    accs[0] = model_mod.accuracy(m, X[pool.test_indices], ds.labels[pool.test_indices])
    selected: list[int] = []
    for step in range(1, budget + 1):
        if spec.selector_kind == "random":
            chosen = strat_mod.select(spec, pool, X, y, m, query_rng, tc)
            if recorder is not None:
                recorder(step, None, chosen)
        else:
            table = strat_mod.compute_scores(spec, pool, X, y, m, tc)
            nonconverged += table.nonconverged
            chosen = table.argmin_index()
            if recorder is not None:
                recorder(step, table, chosen)
        pool.add_label(chosen)
        pool.check_invariants(n_total=ds.n)
        selected.append(chosen)
        m = model_mod.train(X[pool.labeled], y[pool.labeled],
                            replace(tc, warm_start=m))
        nonconverged += 0 if m.converged else 1
        accs[step] = model_mod.accuracy(m, X[pool.test_indices],
                                        ds.labels[pool.test_indices])
    curve = LearningCurve(accuracies=accs)
    return TrialResult(dataset=ds.name, strategy=strategy, trial=trial_idx,
                       curve=curve, alc=alc(curve),
                       selected_indices=tuple(selected),
                       nonconverged=nonconverged,
                       test_indices=tuple(int(i) for i in pool.test_indices))


def worker_count(n_tasks: int) -> int:
    """Worker cap from UNCERTAL_THREADS (0 or unset means auto)."""
    raw = os.environ.get(THREADS_ENV, "0").strip() or "0"
    try:
        requested = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if requested < 0:
        raise ValueError(f"{THREADS_ENV} must be non-negative")
    if requested == 0:
        requested = os.cpu_count() or 1
    return max(1, min(requested, n_tasks))


def run_experiment(cfg: ExperimentConfig,
                   datasets: dict[str, Dataset] | None = None
                   ) -> list[TrialResult]:
    """All (dataset, strategy, trial) runs, in deterministic order.

    Trials are independent and fan out over a thread pool (the compiled
    kernels release the GIL); results are assembled in task order, so the
    output never depends on scheduling.
    """
    if datasets is None:
        datasets = {ref.name: ref.load() for ref in cfg.datasets}
    tasks = [(datasets[ref.name], strategy, trial)
             for ref in cfg.datasets
             for strategy in cfg.strategies
             for trial in range(cfg.trials)]
    workers = worker_count(len(tasks))
    if workers == 1:
        return [run_trial(ds, strategy, cfg, trial)
                for ds, strategy, trial in tasks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(run_trial, ds, strategy, cfg, trial)
                   for ds, strategy, trial in tasks]
        return [f.result() for f in futures]


def paired_t_test(a, b, alpha: float) -> str:
    """Two-sided paired t-test decision for "a versus b": win, tie or loss.

    Win means a's mean is significantly higher at level ``alpha``. The
    p-value comes from the regularized incomplete beta tail of the t
    distribution rather than a lookup table. Zero-variance differences
    short-circuit: all-zero is a tie, otherwise the sign decides.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("paired samples must be equal-length vectors")
    k = a.shape[0]
    if k < 2:
        raise ValueError("need at least 2 paired samples")
    d = a - b
    mean = float(np.mean(d))
    if np.all(d == 0.0):
        return "tie"
    sd = float(np.std(d, ddof=1))
    if sd == 0.0:
        return "win" if mean > 0 else "loss"
    t = mean / (sd / np.sqrt(k))
    nu = k - 1
    p = float(betainc(nu / 2.0, 0.5, nu / (nu + t * t)))
    if p < alpha:
        return "win" if mean > 0 else "loss"
    return "tie"


def average_ranks(values: np.ndarray) -> np.ndarray:
    """Ranks of ``values`` with 1 for the largest; ties get the average rank."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(-values, kind="stable")
    ranks = np.empty(len(values), dtype=np.float64)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


# Proposed-versus-baseline pairs reported in the win/tie/loss footer.
COMPARISON_PAIRS = (("ueer", "eer"), ("umli", "mli"))


@dataclass(frozen=True)
class ComparisonTable:
    """Mean-ALC table with per-dataset ranks and pairwise test decisions."""

    datasets: tuple[str, ...]
    strategies: tuple[str, ...]
    mean_alc: np.ndarray        # (len(datasets), len(strategies))
    ranks: np.ndarray           # same shape; 1 = best mean ALC
    average_rank: np.ndarray    # (len(strategies),)
    decisions: dict[tuple[str, str], tuple[str, ...]]
    win_tie_loss: dict[tuple[str, str], tuple[int, int, int]]

    def mean_row(self) -> np.ndarray:
        return self.mean_alc.mean(axis=0)


def build_table(results: list[TrialResult], cfg: ExperimentConfig) -> ComparisonTable:
    """Aggregate trial results into the comparison table.

    Requires exactly ``cfg.trials`` results per (dataset, strategy) cell;
    pairwise decisions use the paired per-trial ALCs.
    """
    names = tuple(ref.name for ref in cfg.datasets)
    strategies = tuple(cfg.strategies)
    cells: dict[tuple[str, str], dict[int, float]] = {
        (d, s): {} for d in names for s in strategies}
    for r in results:
        key = (r.dataset, r.strategy)
        if key in cells:
            cells[key][r.trial] = r.alc
    alcs: dict[tuple[str, str], np.ndarray] = {}
    for key, per_trial in cells.items():
        if sorted(per_trial) != list(range(cfg.trials)):
            raise ValueError(f"missing trials for {key[0]}/{key[1]}")
        alcs[key] = np.array([per_trial[t] for t in range(cfg.trials)])
    mean_alc = np.array([[float(np.mean(alcs[(d, s)])) for s in strategies]
                         for d in names])
    ranks = np.vstack([average_ranks(row) for row in mean_alc])
    decisions: dict[tuple[str, str], tuple[str, ...]] = {}
    wtl: dict[tuple[str, str], tuple[int, int, int]] = {}
    for new, base in COMPARISON_PAIRS:
        if new in strategies and base in strategies:
            per_ds = tuple(
                paired_t_test(alcs[(d, new)], alcs[(d, base)], cfg.significance)
                for d in names)
            decisions[(new, base)] = per_ds
            wtl[(new, base)] = (per_ds.count("win"), per_ds.count("tie"),
                                per_ds.count("loss"))
    return ComparisonTable(datasets=names, strategies=strategies,
                           mean_alc=mean_alc, ranks=ranks,
                           average_rank=ranks.mean(axis=0),
                           decisions=decisions, win_tie_loss=wtl)
