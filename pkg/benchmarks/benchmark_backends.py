#!/usr/bin/env python3
"""Timing comparison of the compiled and pure numpy kernel backends.

    python benchmarks/benchmark_backends.py [--repeat 3]

Times the solver alone, one full retraining query step at two dataset
scales, and one end-to-end trial on the bundled wine dataset.
"""

import argparse
import time

import numpy as np

from uncertal._backend import load_backend


def bench(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def trial_case(backend_name):
    # run_trial picks up the active backend through the modules, so swap it
    import uncertal._backend as B
    import uncertal.model as M
    import uncertal.strategies as S
    mod = load_backend(backend_name)
    saved = (B.kernels, M.kernels, S.kernels)
    B.kernels = M.kernels = S.kernels = mod

    def run():
        from uncertal import DatasetRef, ExperimentConfig, load_bundled, run_trial
        ds = load_bundled("wine")
        cfg = ExperimentConfig(datasets=(DatasetRef(name="wine"),),
                               strategies=("ueer",), trials=2, budget=25,
                               base_seed=0)
        run_trial(ds, "ueer", cfg, 0)

    def restore():
        B.kernels, M.kernels, S.kernels = saved

    return run, restore


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    backends = {}
    backends["pure"] = load_backend("pure")
    try:
        backends["compiled"] = load_backend("compiled")
    except ImportError:
        print("compiled extension not built; timing the pure backend only")

    rng = np.random.default_rng(0)
    cases = {}
    for label, (n, d, u) in (("small (n=30, d=5, u=60)", (30, 5, 60)),
                             ("wdbc-scale (n=52, d=30, u=233)", (52, 30, 233))):
        XaL = np.hstack([rng.normal(size=(n, d)), np.ones((n, 1))])
        yL = np.where(rng.random(n) < 0.5, 1.0, -1.0)
        yL[:2] = [1.0, -1.0]
        XaU = np.hstack([rng.normal(size=(u, d)), np.ones((u, 1))])
        cases[label] = (XaL, yL, XaU)

    print(f"{'benchmark':44s}" + "".join(f"{b:>12s}" for b in backends)
          + ("     speedup" if len(backends) == 2 else ""))
    rows = []
    for label, (XaL, yL, XaU) in cases.items():
        w0 = np.zeros(XaL.shape[1])
        times = []
        for name, mod in backends.items():
            times.append(bench(lambda m=mod: m.newton_fit(
                XaL, yL, 100.0, w0, 1e-8, 200), args.repeat))
        rows.append((f"newton_fit {label}", times))
        wb = backends["pure"].newton_fit(XaL, yL, 100.0, w0, 1e-8, 200)[0]
        times = []
        for name, mod in backends.items():
            times.append(bench(lambda m=mod: m.score_retraining(
                XaL, yL, XaU, wb, 100.0, 1e-8, 200, 0, True, False, True),
                args.repeat))
        rows.append((f"query step (eer) {label}", times))
    for name in backends:
        run, restore = trial_case(name)
        try:
            t = bench(run, args.repeat)
        finally:
            restore()
        rows.append((f"wine ueer trial, budget=25 [{name}]", [t]))

    for label, times in rows:
        cells = "".join(f"{t * 1e3:10.2f}ms" for t in times)
        speed = ""
        if len(times) == 2 and times[1] > 0:
            speed = f"{times[0] / times[1]:10.1f}x"
        print(f"{label:44s}{cells}{speed}")


if __name__ == "__main__":
    main()
