"""Compare the numba kernels with the pure-numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Both paths produce the same numbers (checked below); only speed differs.
"""
import argparse
import time

import numpy as np

from msnsim import USE_NUMBA, rng
from msnsim.network.noisy import dense_per_weight


def best_of(fn, repeat):
    fn()  # warm-up / compile
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not USE_NUMBA:
        raise SystemExit("numba is disabled; unset MSN_DISABLE_NUMBA to compare backends")

    passes = np.arange(64, dtype=np.uint64)
    count = 20_000
    r = np.random.default_rng(0)
    x, w, b = r.normal(size=(64, 784)), r.normal(size=(128, 784)) * 0.05, np.zeros(128)

    cases = {
        f"normal_block 64x{count}": lambda be: rng.normal_block(1, 0, passes, 0, count, backend=be),
        "dense_per_weight 64 imgs 784->128": lambda be: dense_per_weight(x, w, b, 0.01, 1, 0, passes, 0,
                                                                      backend=be),
    }
    print(f"{'kernel':40s} {'numba s':>10s} {'numpy s':>10s} {'speedup':>8s}")
    for name, fn in cases.items():
        a, c = fn("numba"), fn("numpy")
        assert np.allclose(a, c, rtol=1e-12, atol=1e-12), name
        tn = best_of(lambda: fn("numba"), args.repeat)
        tp = best_of(lambda: fn("numpy"), args.repeat)
        print(f"{name:40s} {tn:10.4f} {tp:10.4f} {tp / tn:8.1f}x")


if __name__ == "__main__":
    main()
