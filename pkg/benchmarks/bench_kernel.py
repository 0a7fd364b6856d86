"""Compare the compiled and pure-Python replica kernels.

    python benchmarks/bench_kernel.py [--repeat 3] [--devices 30] [--hours 5]
"""

import argparse
import time

import numpy as np

from hansim._pykernel import run_replica as py_run

try:
    from hansim._ckernel import run_replica as c_run
except ImportError:
    c_run = None


def workloads(n, horizon, seed):
    g = np.random.default_rng(seed)
    z = np.zeros(n, dtype=np.int64)
    yield "saturated", (n, 900, 1800, horizon, z, np.arange(n, dtype=np.int64), np.ones(n, np.int64))
    k = int(10 * n * horizon / 3600)
    ticks = np.sort(g.integers(0, horizon, k)).astype(np.int64)
    devs = g.integers(0, n, k).astype(np.int64)
    acts = (g.random(k) < 0.7).astype(np.int64)
    yield "poisson 10/h", (n, 900, 1800, horizon, ticks, devs, acts)
    yield "short slots", (n, 60, 600, horizon, ticks, devs, acts)


def best_of(fn, args, repeat, **kw):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn(*args, **kw)
        times.append(time.perf_counter() - start)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--devices", type=int, default=30)
    ap.add_argument("--hours", type=float, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    horizon = int(args.hours * 3600)

    print(f"{'workload':<14}{'digests':>8}{'python s':>11}{'cython s':>11}{'speedup':>9}")
    for name, case in workloads(args.devices, horizon, args.seed):
        for digests in (False, True):
            tp, (sp, dp) = best_of(py_run, case, args.repeat, digests=digests)
            if c_run is None:
                print(f"{name:<14}{digests!s:>8}{tp:>11.4f}{'n/a':>11}{'':>9}")
                continue
            tc, (sc, dc) = best_of(c_run, case, args.repeat, digests=digests)
            assert np.array_equal(sp, sc) and (not digests or np.array_equal(dp, dc))
            print(f"{name:<14}{digests!s:>8}{tp:>11.4f}{tc:>11.4f}{tp / tc:>8.1f}x")


if __name__ == "__main__":
    main()
