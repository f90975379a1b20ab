"""Compare the compiled and pure-numpy tree kernels.

Run twice to see both paths:

    python benchmarks/bench_kernels.py
    PAST_NO_NUMBA=1 python benchmarks/bench_kernels.py

The two paths share one explicit random-number stream, so besides timing
this also asserts that their outputs are bitwise identical.
"""

import os
import subprocess
import sys
import time

import numpy as np


def bench(label):
    from pastlib import kernels
    from pastlib.estimators import ForestHyperparams, fit_random_forest

    rng = np.random.default_rng(0)
    x = rng.normal(size=(2000, 10))
    y = np.sin(x[:, 0]) + 0.5 * x[:, 1] ** 2 + 0.1 * rng.normal(size=2000)

    hp = ForestHyperparams(n_trees=100, max_depth=8, min_leaf=5)
    # Warm-up (includes JIT compilation when enabled).
    fit_random_forest(x[:200], y[:200], hyperparams=ForestHyperparams(n_trees=2), rng=np.random.default_rng(0))

    t0 = time.perf_counter()
    model = fit_random_forest(x, y, hyperparams=hp, rng=np.random.default_rng(1))
    t_fit = time.perf_counter() - t0

    xq = rng.normal(size=(20000, 10))
    t0 = time.perf_counter()
    pred = model.predict(xq)
    t_pred = time.perf_counter() - t0

    print(f"{label}: numba={'on' if kernels.NUMBA_ENABLED else 'off'} "
          f"fit={t_fit:.3f}s predict={t_pred:.3f}s checksum={pred.sum():.12f}")
    return pred.sum()


if __name__ == "__main__":
    checksum = bench("this process")
    if os.environ.get("PAST_NO_NUMBA") is None:
        # Re-run with the fallback path in a subprocess and compare.
        out = subprocess.run(
            [sys.executable, __file__],
            env={**os.environ, "PAST_NO_NUMBA": "1"},
            capture_output=True,
            text=True,
            check=True,
        ).stdout
        print(out.strip())
        other = float(out.rsplit("checksum=", 1)[1].split()[0])
        assert other == checksum, "paths diverged!"
        print("paths agree bitwise")
