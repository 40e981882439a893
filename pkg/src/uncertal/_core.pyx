# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled implementation of the hot kernels.

Same contract as ``_purepy``: a damped Newton solver for the regularized
logistic loss and the retraining double loop that scores every
(candidate, label) pair. All inner loops run without the GIL so callers
can fan trials out across threads.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, log, log1p, sqrt

cnp.import_array()

NAME = "compiled"

CRITERION_EER = 0
CRITERION_MLI = 1

cdef double P_CLAMP = 1e-12
cdef double COND_LIMIT = 1e12
cdef int CRIT_EER_C = 0
# Rounding allowance in the sufficient-decrease test: near the optimum the
# true decrease drops below double rounding in the objective, and without
# this slack a nearly-converged warm start can stall the line search.
cdef double ARMIJO_EPS = 10.0 * 2.220446049250313e-16


cdef inline double _sigmoid(double t) noexcept nogil:
    cdef double e
    if t >= 0.0:
        return 1.0 / (1.0 + exp(-t))
    e = exp(t)
    return e / (1.0 + e)


cdef inline double _softplus(double z) noexcept nogil:
    # log(1 + exp(z)) = max(z, 0) + log1p(exp(-|z|))
    cdef double m = z if z > 0.0 else 0.0
    return m + log1p(exp(-fabs(z)))


cdef inline double _entropy_term(double p) noexcept nogil:
    cdef double q
    if p < P_CLAMP:
        p = P_CLAMP
    elif p > 1.0 - P_CLAMP:
        p = 1.0 - P_CLAMP
    q = 1.0 - p
    return -(p * log(p) + q * log(q))


cdef double _obj(const double[:, ::1] Xa, const double[::1] y, Py_ssize_t n,
                 Py_ssize_t d1, const double[::1] w, double lam,
                 bint include_reg) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double acc = 0.0, z, r = 0.0
    for i in range(n):
        z = 0.0
        for j in range(d1):
            z += Xa[i, j] * w[j]
        acc += _softplus(-y[i] * z)
    if include_reg:
        for j in range(d1):
            r += w[j] * w[j]
        acc += r / (2.0 * lam)
    return acc


cdef int _cholesky(double[:, ::1] H, double[:, ::1] L, Py_ssize_t d) noexcept nogil:
    # Lower-triangular factor of H (lower triangle of H is read).
    # Returns 0 on a non-positive pivot or an ill-conditioned factor.
    cdef Py_ssize_t i, j, k
    cdef double s, dmin, dmax
    for j in range(d):
        s = H[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k]
        if s <= 0.0:
            return 0
        L[j, j] = sqrt(s)
        for i in range(j + 1, d):
            s = H[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            L[i, j] = s / L[j, j]
    dmin = L[0, 0]
    dmax = L[0, 0]
    for j in range(1, d):
        if L[j, j] < dmin:
            dmin = L[j, j]
        if L[j, j] > dmax:
            dmax = L[j, j]
    if (dmax / dmin) * (dmax / dmin) > COND_LIMIT:
        return 0
    return 1


cdef void _chol_solve(const double[:, ::1] L, double[::1] x, Py_ssize_t d) noexcept nogil:
    # Solves L L^T x = b in place; x holds b on entry.
    cdef Py_ssize_t i, k
    cdef double s
    for i in range(d):
        s = x[i]
        for k in range(i):
            s -= L[i, k] * x[k]
        x[i] = s / L[i, i]
    for i in range(d - 1, -1, -1):
        s = x[i]
        for k in range(i + 1, d):
            s -= L[k, i] * x[k]
        x[i] = s / L[i, i]


cdef int _newton(const double[:, ::1] Xa, const double[::1] y, Py_ssize_t n,
                 Py_ssize_t d1, double lam, double grad_tol, int max_iter,
                 double[::1] w, double[::1] g, double[::1] step,
                 double[::1] wtry, double[::1] s,
                 double[:, ::1] H, double[:, ::1] L,
                 double* out_ginf, int* out_steps) noexcept nogil:
    cdef Py_ssize_t i, j, k
    cdef int it, ls, steps = 0, converged = 0, chol_ok
    cdef double f, ftry, ginf, z, c, gd, t, a, slack
    f = _obj(Xa, y, n, d1, w, lam, 1)
    ginf = 0.0
    for it in range(max_iter + 1):
        # gradient: w/lam - sum_i y_i sigmoid(-m_i) x_i
        for j in range(d1):
            g[j] = w[j] / lam
        for i in range(n):
            z = 0.0
            for j in range(d1):
                z += Xa[i, j] * w[j]
            s[i] = _sigmoid(-y[i] * z)
            c = y[i] * s[i]
            for j in range(d1):
                g[j] -= c * Xa[i, j]
        ginf = 0.0
        for j in range(d1):
            if fabs(g[j]) > ginf:
                ginf = fabs(g[j])
        if ginf <= grad_tol:
            converged = 1
            break
        if it == max_iter:
            break
        # Hessian (lower triangle): I/lam + Xa^T diag(s(1-s)) Xa
        for j in range(d1):
            for k in range(j + 1):
                H[j, k] = 0.0
        for i in range(n):
            c = s[i] * (1.0 - s[i])
            for j in range(d1):
                a = c * Xa[i, j]
                for k in range(j + 1):
                    H[j, k] += a * Xa[i, k]
        for j in range(d1):
            H[j, j] += 1.0 / lam
        chol_ok = _cholesky(H, L, d1)
        if chol_ok:
            for j in range(d1):
                step[j] = -g[j]
            _chol_solve(L, step, d1)
        else:
            for j in range(d1):
                step[j] = -g[j]
        gd = 0.0
        for j in range(d1):
            gd += g[j] * step[j]
        t = 1.0
        ftry = f
        slack = ARMIJO_EPS * fabs(f)
        for ls in range(60):
            for j in range(d1):
                wtry[j] = w[j] + t * step[j]
            ftry = _obj(Xa, y, n, d1, wtry, lam, 1)
            if ftry <= f + 1e-4 * t * gd + slack:
                break
            t *= 0.5
        else:
            break
        for j in range(d1):
            w[j] = wtry[j]
        f = ftry
        steps += 1
    out_ginf[0] = ginf
    out_steps[0] = steps
    return converged


def sigmoid(t):
    """Numerically stable logistic function, elementwise."""
    arr = np.ascontiguousarray(np.atleast_1d(np.asarray(t, dtype=np.float64)))
    out = np.empty_like(arr)
    cdef const double[::1] tv = arr.ravel()
    cdef double[::1] ov = out.ravel()
    cdef Py_ssize_t i, n = tv.shape[0]
    with nogil:
        for i in range(n):
            ov[i] = _sigmoid(tv[i])
    return out if np.ndim(t) else float(out[0])


def softplus(z):
    """log(1 + exp(z)) via the stable branch-free form."""
    arr = np.ascontiguousarray(np.atleast_1d(np.asarray(z, dtype=np.float64)))
    out = np.empty_like(arr)
    cdef const double[::1] zv = arr.ravel()
    cdef double[::1] ov = out.ravel()
    cdef Py_ssize_t i, n = zv.shape[0]
    with nogil:
        for i in range(n):
            ov[i] = _softplus(zv[i])
    return out if np.ndim(z) else float(out[0])


def objective(Xa, y, w, lam, include_reg=True):
    """Regularized logistic loss ||w||^2/(2 lam) + sum log(1+exp(-y Xa w))."""
    cdef const double[:, ::1] X = np.ascontiguousarray(Xa, dtype=np.float64)
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef const double[::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef bint reg = include_reg
    cdef double lam_c = lam
    cdef double out
    with nogil:
        out = _obj(X, yv, X.shape[0], X.shape[1], wv, lam_c, reg)
    return out


def gradient(Xa, y, w, lam):
    """Analytic gradient of ``objective`` with the regularizer included."""
    cdef const double[:, ::1] X = np.ascontiguousarray(Xa, dtype=np.float64)
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef const double[::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t i, j, n = X.shape[0], d1 = X.shape[1]
    out = np.empty(d1, dtype=np.float64)
    cdef double[::1] g = out
    cdef double lam_c = lam, z, c
    with nogil:
        for j in range(d1):
            g[j] = wv[j] / lam_c
        for i in range(n):
            z = 0.0
            for j in range(d1):
                z += X[i, j] * wv[j]
            c = yv[i] * _sigmoid(-yv[i] * z)
            for j in range(d1):
                g[j] -= c * X[i, j]
    return out


def entropy_sum(Xa, w):
    """Summed binary entropy (nats) of the model posteriors over all rows."""
    cdef const double[:, ::1] X = np.ascontiguousarray(Xa, dtype=np.float64)
    cdef const double[::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t i, j, n = X.shape[0], d1 = X.shape[1]
    cdef double total = 0.0, z
    with nogil:
        for i in range(n):
            z = 0.0
            for j in range(d1):
                z += X[i, j] * wv[j]
            total += _entropy_term(_sigmoid(z))
    return total


def newton_fit(Xa, y, lam, w0, grad_tol, max_iter):
    """Minimize the regularized logistic loss with damped Newton steps.

    Same return contract as the pure backend:
    ``(w, grad_inf, steps, converged)``.
    """
    cdef const double[:, ::1] X = np.ascontiguousarray(Xa, dtype=np.float64)
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t n = X.shape[0], d1 = X.shape[1]
    w = np.array(w0, dtype=np.float64, copy=True)
    cdef double[::1] wv = w
    g = np.empty(d1, dtype=np.float64)
    step = np.empty(d1, dtype=np.float64)
    wtry = np.empty(d1, dtype=np.float64)
    s = np.empty(n, dtype=np.float64)
    H = np.empty((d1, d1), dtype=np.float64)
    L = np.empty((d1, d1), dtype=np.float64)
    cdef double[::1] gv = g, stepv = step, wtryv = wtry, sv = s
    cdef double[:, ::1] Hv = H, Lv = L
    cdef double ginf = 0.0
    cdef int steps = 0, converged
    cdef double lam_c = lam, tol_c = grad_tol
    cdef int mi = max_iter
    with nogil:
        converged = _newton(X, yv, n, d1, lam_c, tol_c, mi, wv, gv, stepv,
                            wtryv, sv, Hv, Lv, &ginf, &steps)
    return w, ginf, steps, bool(converged)


def score_retraining(XaL, yL, XaU, w_base, lam, grad_tol, max_iter,
                     criterion, include_reg, include_candidate, warm):
    """Retraining double loop; see the pure backend for the full contract.

    Returns ``(v, p_base, nonconverged)`` with ``v`` of shape (u, 2) holding
    scores for hypothesized labels +1 and -1 per pool candidate.
    """
    cdef const double[:, ::1] XL = np.ascontiguousarray(XaL, dtype=np.float64)
    cdef const double[::1] yLv = np.ascontiguousarray(yL, dtype=np.float64)
    cdef const double[:, ::1] XU = np.ascontiguousarray(XaU, dtype=np.float64)
    cdef const double[::1] wb = np.ascontiguousarray(w_base, dtype=np.float64)
    cdef Py_ssize_t m = XL.shape[0], d1 = XL.shape[1], u = XU.shape[0]
    cdef int crit = criterion, mi = max_iter
    cdef bint inc_reg = include_reg, inc_cand = include_candidate, do_warm = warm
    cdef double lam_c = lam, tol_c = grad_tol

    v = np.empty((u, 2), dtype=np.float64)
    p_base = np.empty(u, dtype=np.float64)
    Xp = np.empty((m + 1, d1), dtype=np.float64)
    Xp[:m] = np.asarray(XL)
    yp = np.empty(m + 1, dtype=np.float64)
    yp[:m] = np.asarray(yLv)
    wfit = np.empty(d1, dtype=np.float64)
    g = np.empty(d1, dtype=np.float64)
    step = np.empty(d1, dtype=np.float64)
    wtry = np.empty(d1, dtype=np.float64)
    s = np.empty(m + 1, dtype=np.float64)
    H = np.empty((d1, d1), dtype=np.float64)
    L = np.empty((d1, d1), dtype=np.float64)
    ent = np.empty(u if crit == CRITERION_EER else 1, dtype=np.float64)

    cdef double[:, ::1] vv = v, Xpv = Xp, Hv = H, Lv = L
    cdef double[::1] pbv = p_base, ypv = yp, wfitv = wfit, gv = g
    cdef double[::1] stepv = step, wtryv = wtry, sv = s, entv = ent
    cdef Py_ssize_t i, j, k, col
    cdef double lab, z, total, ginf
    cdef int steps, nonconverged = 0, ok
    with nogil:
        for j in range(u):
            z = 0.0
            for k in range(d1):
                z += XU[j, k] * wb[k]
            pbv[j] = _sigmoid(z)
        for j in range(u):
            for k in range(d1):
                Xpv[m, k] = XU[j, k]
            for col in range(2):
                lab = 1.0 if col == 0 else -1.0
                ypv[m] = lab
                if do_warm:
                    for k in range(d1):
                        wfitv[k] = wb[k]
                else:
                    for k in range(d1):
                        wfitv[k] = 0.0
                ok = _newton(Xpv, ypv, m + 1, d1, lam_c, tol_c, mi, wfitv,
                             gv, stepv, wtryv, sv, Hv, Lv, &ginf, &steps)
                if not ok:
                    nonconverged += 1
                if crit == CRIT_EER_C:
                    total = 0.0
                    for i in range(u):
                        z = 0.0
                        for k in range(d1):
                            z += XU[i, k] * wfitv[k]
                        entv[i] = _entropy_term(_sigmoid(z))
                        total += entv[i]
                    if not inc_cand:
                        total -= entv[j]
                    vv[j, col] = total
                else:
                    vv[j, col] = _obj(Xpv, ypv, m + 1, d1, wfitv, lam_c, inc_reg)
    return v, p_base, nonconverged
