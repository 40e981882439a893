"""Datasets, pool bookkeeping, and deterministic randomness.

Loads dense binary-classification data from libsvm or csv files, remapping
{0,1} and {1,2} label encodings onto {-1,+1}. Also owns the equal-size
train/test split with its two-point class-balanced seed of labeled data,
feature standardization fit on the training slice, the 2-D Gaussian
synthetic generator, and named PCG64 substreams so every trial draws from
its own reproducible sequence.
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

log = logging.getLogger("uncertal.data")


class DataError(ValueError):
    """Raised for unparseable or invalid dataset content."""


def substream(base_seed: int, *labels) -> np.random.Generator:
    """Named deterministic random stream.

    Same ``(base_seed, labels...)`` always yields the same PCG64 sequence;
    distinct labels yield statistically independent streams.
    """
    key = []
    for lab in labels:
        digest = hashlib.sha256(repr(lab).encode("utf-8")).digest()
        key.append(int.from_bytes(digest[:4], "little"))
        key.append(int.from_bytes(digest[4:8], "little"))
    ss = np.random.SeedSequence(entropy=int(base_seed) & (2**64 - 1),
                                spawn_key=tuple(key))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class Dataset:
    """Dense feature matrix with {-1,+1} labels."""

    name: str
    features: np.ndarray  # (n, d) float64
    labels: np.ndarray    # (n,) int64 in {-1, +1}

    def __post_init__(self):
        X = np.ascontiguousarray(self.features, dtype=np.float64)
        y = np.ascontiguousarray(self.labels, dtype=np.int64)
        if X.ndim != 2:
            raise DataError(f"{self.name}: features must be 2-D")
        if y.shape != (X.shape[0],):
            raise DataError(f"{self.name}: labels do not match row count")
        if not np.all(np.isfinite(X)):
            raise DataError(f"{self.name}: features contain NaN or Inf")
        if not np.all(np.abs(y) == 1):
            raise DataError(f"{self.name}: labels must be +1 or -1")
        if len(np.unique(y)) < 2:
            raise DataError(f"{self.name}: both classes must be present")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def class_counts(self) -> tuple[int, int]:
        """(#positive, #negative)."""
        pos = int(np.sum(self.labels == 1))
        return pos, self.n - pos


def _remap_labels(raw: np.ndarray, name: str) -> np.ndarray:
    values = set(np.unique(raw).tolist())
    if values <= {-1.0, 1.0}:
        mapped = raw
    elif values <= {0.0, 1.0}:
        log.info("%s: remapping labels {0,1} -> {-1,+1}", name)
        mapped = np.where(raw == 1.0, 1.0, -1.0)
    elif values <= {1.0, 2.0}:
        log.info("%s: remapping labels {1,2} -> {+1,-1}", name)
        mapped = np.where(raw == 1.0, 1.0, -1.0)
    else:
        raise DataError(
            f"{name}: labels {sorted(values)} not in a supported encoding "
            "({-1,+1}, {0,1} or {1,2})")
    return mapped.astype(np.int64)


def _parse_libsvm(path: Path) -> tuple[np.ndarray, np.ndarray]:
    labels: list[float] = []
    rows: list[dict[int, float]] = []
    dim = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            try:
                labels.append(float(parts[0]))
            except ValueError:
                raise DataError(
                    f"{path}:{lineno}: bad label field {parts[0]!r}") from None
            row: dict[int, float] = {}
            for tok in parts[1:]:
                idx, _, val = tok.partition(":")
                try:
                    i = int(idx)
                    x = float(val)
                except ValueError:
                    raise DataError(
                        f"{path}:{lineno}: bad feature token {tok!r}") from None
                if i < 1:
                    raise DataError(
                        f"{path}:{lineno}: feature indices are 1-based, got {i}")
                row[i - 1] = x
                dim = max(dim, i)
            rows.append(row)
    X = np.zeros((len(rows), dim), dtype=np.float64)
    for r, row in enumerate(rows):
        for c, x in row.items():
            X[r, c] = x
    return X, np.asarray(labels)


def _parse_csv(path: Path) -> tuple[np.ndarray, np.ndarray]:
    data: list[list[float]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            try:
                row = [float(c) for c in cells]
            except ValueError:
                if lineno == 1:  # header row
                    continue
                raise DataError(
                    f"{path}:{lineno}: non-numeric cell") from None
            if data and len(row) != len(data[0]):
                raise DataError(
                    f"{path}:{lineno}: expected {len(data[0])} columns, "
                    f"got {len(row)}")
            data.append(row)
    if not data:
        raise DataError(f"{path}: no data rows")
    arr = np.asarray(data, dtype=np.float64)
    return arr[:, :-1], arr[:, -1]


def load(path, fmt: str, name: str | None = None) -> Dataset:
    """Load a dataset from ``path`` in the given format ("libsvm" or "csv")."""
    path = Path(path)
    if fmt == "libsvm":
        X, raw = _parse_libsvm(path)
    elif fmt == "csv":
        X, raw = _parse_csv(path)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    name = name or path.stem
    if not np.all(np.isfinite(raw)):
        raise DataError(f"{name}: labels contain NaN or Inf")
    ds = Dataset(name=name, features=X, labels=_remap_labels(raw, name))
    if ds.n < 4:
        raise DataError(f"{name}: need at least 4 instances, have {ds.n}")
    return ds


def save_libsvm(ds: Dataset, path) -> None:
    """Write a dataset in libsvm format (1-based indices, 17 digit reals)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row, lab in zip(ds.features, ds.labels):
            feats = " ".join(f"{j + 1}:{v:.17g}" for j, v in enumerate(row))
            fh.write(f"{'+1' if lab == 1 else '-1'} {feats}\n")


def bundled_dataset_names() -> list[str]:
    """Names of data files shipped inside the package."""
    pkg = resources.files("uncertal.datasets")
    names = [p.name.rsplit(".", 1)[0] for p in pkg.iterdir()
             if p.name.endswith((".csv", ".libsvm"))]
    return sorted(names)


def load_bundled(name: str) -> Dataset:
    """Load a bundled dataset by name."""
    pkg = resources.files("uncertal.datasets")
    for ext, fmt in ((".csv", "csv"), (".libsvm", "libsvm")):
        candidate = pkg / f"{name}{ext}"
        if candidate.is_file():
            with resources.as_file(candidate) as real:
                return load(real, fmt, name=name)
    raise FileNotFoundError(
        f"no bundled dataset named {name!r}; have {bundled_dataset_names()}")


@dataclass
class PoolState:
    """Partition of a dataset into test rows and a labeled/unlabeled pool.

    ``labeled`` and ``unlabeled`` always partition ``train_indices``; all
    four arrays are kept sorted so index-order tie-breaking is stable.
    """

    train_indices: np.ndarray
    test_indices: np.ndarray
    labeled: np.ndarray
    unlabeled: np.ndarray

    def check_invariants(self, n_total: int | None = None) -> None:
        train = set(self.train_indices.tolist())
        test = set(self.test_indices.tolist())
        lab = set(self.labeled.tolist())
        unlab = set(self.unlabeled.tolist())
        if train & test:
            raise AssertionError("train and test overlap")
        if lab & unlab:
            raise AssertionError("labeled and unlabeled overlap")
        if lab | unlab != train:
            raise AssertionError("labeled/unlabeled do not partition train")
        if n_total is not None and len(train) + len(test) != n_total:
            raise AssertionError("train/test do not cover the dataset")

    def add_label(self, idx: int) -> None:
        """Move ``idx`` from the unlabeled pool into the labeled set."""
        pos = np.searchsorted(self.unlabeled, idx)
        if pos >= len(self.unlabeled) or self.unlabeled[pos] != idx:
            raise ValueError(f"index {idx} is not in the unlabeled pool")
        self.unlabeled = np.delete(self.unlabeled, pos)
        self.labeled = np.sort(np.append(self.labeled, idx))


def split_and_seed(ds: Dataset, rng: np.random.Generator) -> PoolState:
    """Random equal-size train/test split plus a two-point labeled seed.

    The training side gets the extra instance when ``n`` is odd. The seed
    labeled set holds exactly one uniformly drawn training instance per
    class; the split is redrawn in the rare event a class is missing from
    the training side entirely.
    """
    pos, neg = ds.class_counts()
    if pos < 2 or neg < 2:
        raise DataError(
            f"{ds.name}: need at least 2 instances per class to seed "
            f"(have +1: {pos}, -1: {neg})")
    n = ds.n
    n_train = (n + 1) // 2
    for _ in range(100):
        perm = rng.permutation(n)
        train = np.sort(perm[:n_train])
        test = np.sort(perm[n_train:])
        y_train = ds.labels[train]
        if np.any(y_train == 1) and np.any(y_train == -1):
            break
    else:
        raise DataError(
            f"{ds.name}: failed to draw a training split with both classes")
    pos_train = train[y_train == 1]
    neg_train = train[y_train == -1]
    seed_pos = int(pos_train[rng.integers(len(pos_train))])
    seed_neg = int(neg_train[rng.integers(len(neg_train))])
    labeled = np.sort(np.array([seed_pos, seed_neg]))
    unlabeled = np.setdiff1d(train, labeled)
    state = PoolState(train_indices=train, test_indices=test,
                      labeled=labeled, unlabeled=unlabeled)
    state.check_invariants(n_total=n)
    return state


@dataclass(frozen=True)
class Standardizer:
    """Per-feature shift/scale fitted on a training slice."""

    mean: np.ndarray
    scale: np.ndarray

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.scale


def standardize(X_train: np.ndarray) -> tuple[Standardizer, np.ndarray]:
    """Fit mean-0 / population-std-1 scaling on ``X_train`` and apply it.

    Numerically constant features keep scale 1, so they transform to 0.
    """
    X_train = np.asarray(X_train, dtype=np.float64)
    if X_train.shape[0] == 0:
        raise ValueError("training slice must be non-empty")
    mean = X_train.mean(axis=0)
    std = np.sqrt(np.mean((X_train - mean) ** 2, axis=0))
    floor = 1e-12 * np.maximum(1.0, np.abs(mean))
    scale = np.where(std <= floor, 1.0, std)
    st = Standardizer(mean=mean, scale=scale)
    return st, st.transform(X_train)


@dataclass(frozen=True)
class SyntheticSpec:
    """2-D Gaussian two-class generator settings."""

    per_class: int = 100
    mean_pos: tuple[float, float] = (2.0, 0.0)
    mean_neg: tuple[float, float] = (-2.0, 0.0)
    cov: tuple[tuple[float, float], tuple[float, float]] = ((1.0, 0.0), (0.0, 1.0))
    seed: int = 0

    def __post_init__(self):
        if self.per_class < 1:
            raise ValueError("per_class must be at least 1")


def make_synthetic(spec: SyntheticSpec, name: str = "synthetic") -> Dataset:
    """Two 2-D Gaussian blobs with shared covariance, labels +1 and -1."""
    cov = np.asarray(spec.cov, dtype=np.float64)
    if cov.shape != (2, 2):
        raise DataError("covariance must be 2x2")
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise DataError("covariance must be positive definite") from None
    rng = substream(spec.seed, "synthetic")
    m = spec.per_class
    z = rng.standard_normal((2 * m, 2))
    X = z @ chol.T
    X[:m] += np.asarray(spec.mean_pos, dtype=np.float64)
    X[m:] += np.asarray(spec.mean_neg, dtype=np.float64)
    y = np.concatenate([np.ones(m, dtype=np.int64), -np.ones(m, dtype=np.int64)])
    return Dataset(name=name, features=X, labels=y)


def bayes_boundary_distance(spec: SyntheticSpec, X: np.ndarray) -> np.ndarray:
    """Distance of each row to the generator's optimal decision boundary.

    For equal-covariance Gaussian classes the boundary is the hyperplane
    through the midpoint of the means with normal ``cov^-1 (mu+ - mu-)``.
    """
    mu_p = np.asarray(spec.mean_pos, dtype=np.float64)
    mu_n = np.asarray(spec.mean_neg, dtype=np.float64)
    w = np.linalg.solve(np.asarray(spec.cov, dtype=np.float64), mu_p - mu_n)
    mid = (mu_p + mu_n) / 2.0
    return np.abs((np.asarray(X) - mid) @ w) / math.sqrt(float(w @ w))
