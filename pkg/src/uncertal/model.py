"""L2-regularized logistic regression on {-1, +1} labels.

The classifier every query strategy retrains. The decision function is
``w . (x, 1)``: a constant feature is appended and its weight regularized
together with the rest, so the trained objective is

    ||w||^2 / (2 lam) + sum_i log(1 + exp(-y_i w . (x_i, 1)))

with larger ``lam`` meaning weaker regularization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels

DEFAULT_LAMBDA = 100.0
DEFAULT_GRAD_TOL = 1e-8
DEFAULT_MAX_ITER = 200


@dataclass(frozen=True)
class Model:
    """Trained weights (bias last) plus solver diagnostics."""

    weights: np.ndarray
    lam: float
    converged: bool = True
    grad_inf: float = 0.0
    n_iter: int = 0

    def __post_init__(self):
        w = np.ascontiguousarray(self.weights, dtype=np.float64)
        if w.ndim != 1:
            raise ValueError("weights must be a 1-D array")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        """Feature dimensionality (excluding the bias weight)."""
        return self.weights.shape[0] - 1


@dataclass(frozen=True)
class TrainConfig:
    lam: float = DEFAULT_LAMBDA
    grad_tol: float = DEFAULT_GRAD_TOL
    max_iter: int = DEFAULT_MAX_ITER
    warm_start: Model | None = field(default=None, repr=False)

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


def augment(X: np.ndarray) -> np.ndarray:
    """Append the constant-1 bias feature to each row."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("feature matrix must be 2-D")
    out = np.empty((X.shape[0], X.shape[1] + 1), dtype=np.float64)
    out[:, :-1] = X
    out[:, -1] = 1.0
    return out


def _check_xy(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("feature matrix must be 2-D")
    if X.shape[0] == 0:
        raise ValueError("labeled set must be non-empty")
    if y.shape != (X.shape[0],):
        raise ValueError("labels must be a vector matching the row count")
    if not np.all(np.isfinite(X)):
        raise ValueError("features must be finite")
    if not np.all(np.abs(y) == 1.0):
        raise ValueError("labels must be +1 or -1")
    return X, y


def train(X, y, config: TrainConfig = TrainConfig()) -> Model:
    """Fit the regularized logistic model on rows ``X`` with labels ``y``.

    Starts from ``config.warm_start`` when given (or from zero weights if
    zero scores a lower objective), and flags rather than raises when the
    gradient tolerance is not reached within ``config.max_iter`` steps.
    """
    X, y = _check_xy(X, y)
    Xa = augment(X)
    d1 = Xa.shape[1]
    w0 = np.zeros(d1)
    if config.warm_start is not None:
        ws = config.warm_start.weights
        if ws.shape[0] != d1:
            raise ValueError(
                f"warm start has {ws.shape[0] - 1} features, data has {d1 - 1}")
        # Never start above the zero vector: keeps the final objective no
        # worse than either candidate start.
        if (kernels.objective(Xa, y, ws, config.lam)
                <= kernels.objective(Xa, y, w0, config.lam)):
            w0 = ws
    w, ginf, steps, converged = kernels.newton_fit(
        Xa, y, config.lam, w0, config.grad_tol, config.max_iter)
    return Model(weights=w, lam=config.lam, converged=converged,
                 grad_inf=ginf, n_iter=steps)


def _check_model_x(model: Model, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    one = X.ndim == 1
    if one:
        X = X[None, :]
    if X.shape[1] != model.dim:
        raise ValueError(
            f"model expects {model.dim} features, got {X.shape[1]}")
    return X


def posterior(model: Model, x) -> tuple[float, float]:
    """Posterior pair (P(+1|x), P(-1|x)); the two entries sum to 1 exactly."""
    X = _check_model_x(model, x)
    if X.shape[0] != 1:
        raise ValueError("posterior takes a single feature vector")
    p = float(posterior_positive(model, X)[0])
    return p, 1.0 - p


def posterior_positive(model: Model, X) -> np.ndarray:
    """P(+1|x) for every row of ``X``.

    The margin is reduced per row (not via a matrix product) so the value
    for a given x never depends on which other rows share the call.
    """
    X = _check_model_x(model, X)
    margins = np.sum(augment(X) * model.weights, axis=1)
    return kernels.sigmoid(margins)


def predict(model: Model, X) -> np.ndarray:
    """Hard labels in {-1, +1}; a margin of exactly zero predicts +1."""
    X = _check_model_x(model, X)
    margins = augment(X) @ model.weights
    return np.where(margins >= 0.0, 1, -1).astype(np.int64)


def accuracy(model: Model, X, y) -> float:
    """Fraction of rows whose predicted label matches ``y``."""
    y = np.asarray(y)
    return float(np.mean(predict(model, X) == y))


def objective_value(model: Model, X, y, include_regularizer: bool = True) -> float:
    """Training objective of ``model`` on (X, y).

    Sum of per-point logistic losses, plus ``||w||^2 / (2 lam)`` iff
    ``include_regularizer`` is set.
    """
    X, y = _check_xy(X, y)
    if X.shape[1] != model.dim:
        raise ValueError(
            f"model expects {model.dim} features, got {X.shape[1]}")
    return float(kernels.objective(
        augment(X), y, model.weights, model.lam, include_regularizer))


def gradient(model: Model, X, y) -> np.ndarray:
    """Analytic gradient of the full training objective at the model weights."""
    X, y = _check_xy(X, y)
    if X.shape[1] != model.dim:
        raise ValueError(
            f"model expects {model.dim} features, got {X.shape[1]}")
    return kernels.gradient(augment(X), y, model.weights, model.lam)
