"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--rows 2000]

Both backends get identical inputs; the script also checks that their
results agree before reporting timings.
"""

import argparse
import time

import numpy as np

from confperf import _purepy

try:
    from confperf import _native
except ImportError:  # extension not built
    _native = None


def _time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def cases(rows, seed=0):
    rng = np.random.default_rng(seed)
    X = np.ascontiguousarray(rng.integers(0, 5, size=(rows, 12)).astype(float))
    y = X @ rng.uniform(1, 5, 12) + X[:, 0] * X[:, 1] + rng.normal(0, 0.1, rows)
    idx = np.arange(rows, dtype=np.int64)
    n_svr = min(rows, 300)
    Z = X[:n_svr] / 4.0
    sq = (Z ** 2).sum(1)
    K = np.exp(-0.5 * (sq[:, None] + sq[None, :] - 2 * Z @ Z.T))
    ys = y[:n_svr] / y.max()
    return {
        "best_split": lambda m: m.best_split(X, y, idx, np.arange(12, dtype=np.int64), 1),
        "build_tree": lambda m: m.build_tree(X, y, idx, 12, 1, False, 0),
        "build_tree(random)": lambda m: m.build_tree(X, y, idx, 4, 1, True, 0),
        "smo_solve": lambda m: m.smo_solve(K, ys, 10.0, 0.01, 1e-3, True, 1_000_000),
    }


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, z) for x, z in zip(a, b))
    return np.allclose(np.asarray(a, dtype=float), np.asarray(b, dtype=float), rtol=1e-9, atol=1e-12)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--rows", type=int, default=2000)
    args = ap.parse_args()
    if _native is None:
        print("compiled extension not available; timing the fallback only")
    print(f"{'kernel':<20} {'python [s]':>11} {'native [s]':>11} {'speed-up':>9}  agree")
    for name, run in cases(args.rows).items():
        tp, out_p = _time(lambda: run(_purepy), args.repeat)
        if _native is None:
            print(f"{name:<20} {tp:>11.4f}")
            continue
        tn, out_n = _time(lambda: run(_native), args.repeat)
        print(f"{name:<20} {tp:>11.4f} {tn:>11.4f} {tp / tn:>8.1f}x  {_same(out_p, out_n)}")


if __name__ == "__main__":
    main()
