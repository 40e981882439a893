"""Compiled-versus-pure kernel parity.

Both backends implement the same algorithms step for step, so converged
results agree to solver tolerance and selections agree exactly after the
score-rounding rule.
"""

import numpy as np
import pytest

from uncertal._backend import backend_name, load_backend

pure = load_backend("pure")
try:
    compiled = load_backend("compiled")
except ImportError:
    compiled = None

needs_compiled = pytest.mark.skipif(
    compiled is None, reason="compiled extension not built")


def problem(seed, n=24, d=4):
    rng = np.random.default_rng(seed)
    Xa = np.hstack([rng.normal(size=(n, d)), np.ones((n, 1))])
    y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    y[:2] = [1.0, -1.0]
    return Xa, y


@needs_compiled
def test_primitives_parity():
    rng = np.random.default_rng(0)
    z = rng.normal(size=200) * 20
    assert np.allclose(compiled.sigmoid(z), pure.sigmoid(z), atol=1e-15)
    assert np.allclose(compiled.softplus(z), pure.softplus(z), atol=1e-13)
    Xa, y = problem(1)
    w = rng.normal(size=Xa.shape[1])
    assert compiled.objective(Xa, y, w, 100.0) == \
        pytest.approx(pure.objective(Xa, y, w, 100.0), rel=1e-14)
    assert np.allclose(compiled.gradient(Xa, y, w, 100.0),
                       pure.gradient(Xa, y, w, 100.0), atol=1e-12)
    assert compiled.entropy_sum(Xa, w) == \
        pytest.approx(pure.entropy_sum(Xa, w), rel=1e-14)


@needs_compiled
@pytest.mark.parametrize("seed", range(5))
def test_newton_fit_parity(seed):
    Xa, y = problem(seed)
    d1 = Xa.shape[1]
    for w0 in (np.zeros(d1), np.full(d1, 0.3)):
        wc, gc, ic, cc = compiled.newton_fit(Xa, y, 100.0, w0, 1e-8, 200)
        wp, gp, ip, cp = pure.newton_fit(Xa, y, 100.0, w0, 1e-8, 200)
        assert cc and cp
        assert np.max(np.abs(wc - wp)) < 1e-9
        assert gc <= 1e-8 and gp <= 1e-8


@needs_compiled
@pytest.mark.parametrize("criterion", [0, 1])
def test_score_retraining_parity(criterion):
    rng = np.random.default_rng(9)
    XaL, yL = problem(3, n=6, d=2)
    XaU = np.hstack([rng.normal(size=(9, 2)), np.ones((9, 1))])
    wb, *_ = pure.newton_fit(XaL, yL, 100.0, np.zeros(3), 1e-8, 200)
    out_c = compiled.score_retraining(XaL, yL, XaU, wb, 100.0, 1e-8, 200,
                                      criterion, True, False, True)
    out_p = pure.score_retraining(XaL, yL, XaU, wb, 100.0, 1e-8, 200,
                                  criterion, True, False, True)
    assert np.max(np.abs(out_c[0] - out_p[0])) < 1e-9
    assert np.max(np.abs(out_c[1] - out_p[1])) < 1e-14
    assert out_c[2] == out_p[2] == 0


@needs_compiled
def test_selection_agreement_on_small_pools():
    from uncertal import TrainConfig, train
    from uncertal.data import PoolState
    from uncertal.strategies import REGISTRY, SCORE_DECIMALS, compute_scores

    tc = TrainConfig(lam=100.0)
    rng = np.random.default_rng(4)
    for trial in range(10):
        n = 12
        X = rng.normal(size=(n, 2))
        y = np.where(X[:, 0] > 0, 1, -1).astype(np.int64)
        y[0], y[1] = 1, -1
        pool = PoolState(train_indices=np.arange(n),
                         test_indices=np.empty(0, dtype=int),
                         labeled=np.array([0, 1]),
                         unlabeled=np.arange(2, n))
        m = train(X[pool.labeled], y[pool.labeled], tc)
        for name in ("eer", "ueer", "mli", "umli"):
            spec = REGISTRY[name]
            import uncertal.strategies as S
            kern_saved = S.kernels
            try:
                S.kernels = compiled
                tab_c = compute_scores(spec, pool, X, y, m, tc)
                S.kernels = pure
                tab_p = compute_scores(spec, pool, X, y, m, tc)
            finally:
                S.kernels = kern_saved
            assert np.max(np.abs(tab_c.aggregated - tab_p.aggregated)) < 1e-9
            assert tab_c.argmin_index() == tab_p.argmin_index()


def test_backend_name_reported():
    assert backend_name() in ("compiled", "pure")


def test_env_override_selects_pure(tmp_path):
    import subprocess
    import sys
    code = "import uncertal; print(uncertal.backend_name())"
    import os
    env = dict(os.environ, UNCERTAL_BACKEND="pure")
    out = subprocess.run([sys.executable, "-c", code], env=env,
                         capture_output=True, text=True)
    assert out.stdout.strip() == "pure"
