"""Pure numpy implementation of the hot kernels.

Mirrors the compiled extension in ``_core.pyx`` operation for operation so
that either backend can serve the rest of the package. Kept deliberately
free of package-internal imports: everything here works on plain arrays of
bias-augmented feature rows and {-1, +1} labels.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular

NAME = "pure"

# Probabilities are clamped into this range only when a log is taken.
P_CLAMP = 1e-12
# Cholesky diagonal ratio beyond which the Newton system counts as
# ill-conditioned and a plain gradient step is taken instead.
COND_LIMIT = 1e12
# Rounding allowance in the sufficient-decrease test: near the optimum the
# true decrease drops below double rounding in the objective, and without
# this slack a nearly-converged warm start can stall the line search.
ARMIJO_EPS = 10.0 * 2.220446049250313e-16

CRITERION_EER = 0
CRITERION_MLI = 1


def sigmoid(t):
    """Numerically stable logistic function, elementwise."""
    t = np.asarray(t, dtype=np.float64)
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def softplus(z):
    """log(1 + exp(z)) via the stable branch-free form."""
    z = np.asarray(z, dtype=np.float64)
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def objective(Xa, y, w, lam, include_reg=True):
    """Regularized logistic loss ||w||^2/(2 lam) + sum log(1+exp(-y Xa w))."""
    loss = float(np.sum(softplus(-y * (Xa @ w))))
    if include_reg:
        loss += float(w @ w) / (2.0 * lam)
    return loss


def gradient(Xa, y, w, lam):
    """Analytic gradient of ``objective`` with the regularizer included."""
    s = sigmoid(-y * (Xa @ w))
    return w / lam - Xa.T @ (y * s)


def entropy_sum(Xa, w):
    """Summed binary entropy (nats) of the model posteriors over all rows."""
    p = sigmoid(Xa @ w)
    p = np.clip(p, P_CLAMP, 1.0 - P_CLAMP)
    q = 1.0 - p
    return float(-np.sum(p * np.log(p) + q * np.log(q)))


def newton_fit(Xa, y, lam, w0, grad_tol, max_iter):
    """Minimize the regularized logistic loss with damped Newton steps.

    Falls back to a gradient step whenever the Hessian factorization fails
    or looks ill-conditioned. Returns ``(w, grad_inf, steps, converged)``
    where ``converged`` means the gradient infinity norm reached
    ``grad_tol`` within ``max_iter`` Newton steps.
    """
    n, d1 = Xa.shape
    w = np.array(w0, dtype=np.float64, copy=True)
    f = objective(Xa, y, w, lam)
    ginf = np.inf
    steps = 0
    converged = False
    for it in range(max_iter + 1):
        m = y * (Xa @ w)
        s = sigmoid(-m)
        g = w / lam - Xa.T @ (y * s)
        ginf = float(np.max(np.abs(g))) if d1 else 0.0
        if ginf <= grad_tol:
            converged = True
            break
        if it == max_iter:
            break
        d = s * (1.0 - s)
        H = (Xa * d[:, None]).T @ Xa
        H[np.diag_indices(d1)] += 1.0 / lam
        step = None
        try:
            L = np.linalg.cholesky(H)
            diag = np.diag(L)
            if (diag.max() / diag.min()) ** 2 <= COND_LIMIT:
                half = solve_triangular(L, -g, lower=True)
                step = solve_triangular(L.T, half, lower=False)
        except np.linalg.LinAlgError:
            step = None
        if step is None:
            step = -g
        gd = float(g @ step)
        t = 1.0
        accepted = False
        slack = ARMIJO_EPS * abs(f)
        for _ in range(60):
            w_try = w + t * step
            f_try = objective(Xa, y, w_try, lam)
            if f_try <= f + 1e-4 * t * gd + slack:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        w = w_try
        f = f_try
        steps += 1
    return w, ginf, steps, converged


def score_retraining(XaL, yL, XaU, w_base, lam, grad_tol, max_iter,
                     criterion, include_reg, include_candidate, warm):
    """Retraining double loop: one fit per (pool candidate, hypothesized label).

    For candidate j and label c the model is refit on the labeled rows plus
    ``(XaU[j], c)`` and scored with the requested criterion:

    * ``CRITERION_EER``: summed posterior entropy over the pool, excluding
      the candidate itself unless ``include_candidate`` is set;
    * ``CRITERION_MLI``: regularized (or bare, per ``include_reg``) logistic
      loss of the refit model on its own enlarged training set.

    Returns ``(v, p_base, nonconverged)`` with ``v`` of shape (u, 2) holding
    the scores for labels +1 and -1, ``p_base`` the base-model posterior of
    the +1 label per candidate, and ``nonconverged`` the count of refits
    that missed ``grad_tol``.
    """
    m, d1 = XaL.shape
    u = XaU.shape[0]
    v = np.empty((u, 2), dtype=np.float64)
    p_base = sigmoid(XaU @ w_base)
    Xp = np.empty((m + 1, d1), dtype=np.float64)
    Xp[:m] = XaL
    yp = np.empty(m + 1, dtype=np.float64)
    yp[:m] = yL
    nonconverged = 0
    for j in range(u):
        Xp[m] = XaU[j]
        for col, lab in enumerate((1.0, -1.0)):
            yp[m] = lab
            w0 = w_base if warm else np.zeros(d1)
            w_plus, _, _, ok = newton_fit(Xp, yp, lam, w0, grad_tol, max_iter)
            if not ok:
                nonconverged += 1
            if criterion == CRITERION_EER:
                p = sigmoid(XaU @ w_plus)
                p = np.clip(p, P_CLAMP, 1.0 - P_CLAMP)
                q = 1.0 - p
                ent = -(p * np.log(p) + q * np.log(q))
                total = float(np.sum(ent))
                if not include_candidate:
                    total -= float(ent[j])
                v[j, col] = total
            else:
                v[j, col] = objective(Xp, yp, w_plus, lam, include_reg)
    return v, p_base, nonconverged
