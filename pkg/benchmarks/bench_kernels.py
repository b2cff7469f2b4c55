"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Each kernel is warmed up once (so JIT compilation is excluded), then timed
as the best of ``--repeat`` runs.
"""

import argparse
import json
import time

import numpy as np

from fogrl import _accel


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng):
    cap = 1 << 16
    sums = np.zeros(2 * cap)
    maxes = np.zeros(2 * cap)
    leaves = rng.integers(0, 50_000, 1024).astype(np.int64)
    values = rng.random(1024)
    _accel.tree_set_numpy(sums, maxes, cap, np.arange(50_000, dtype=np.int64), rng.random(50_000))
    targets = np.sort(rng.random(1024)) * sums[1]
    t = np.arange(40) * 0.25
    x = rng.normal(size=40)
    mask = rng.random(200_000) < 0.02
    for i in range(1, len(mask)):
        mask[i] |= mask[i - 1] and rng.random() < 0.95
    return {
        "tree_set (1024 leaves)": (
            lambda: _accel.tree_set_numba(sums, maxes, cap, leaves, values),
            lambda: _accel.tree_set_numpy(sums, maxes, cap, leaves, values)),
        "tree_retrieve (1024 targets)": (
            lambda: _accel.tree_retrieve_numba(sums, cap, targets),
            lambda: _accel.tree_retrieve_numpy(sums, cap, targets)),
        "window_stats x1000 (40 samples)": (
            lambda: [_accel.window_stats_numba(t, x) for _ in range(1000)],
            lambda: [_accel.window_stats_numpy(t, x) for _ in range(1000)]),
        "runs (200k mask)": (
            lambda: _accel.runs_numba(mask),
            lambda: _accel.runs_numpy(mask)),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json", help="also write results here")
    args = ap.parse_args(argv)
    if not _accel.HAVE_NUMBA:
        print("numba is not installed; nothing to compare")
        return 1
    rows = []
    print(f"{'kernel':34s} {'numba ms':>10s} {'numpy ms':>10s} {'speedup':>8s}")
    for name, (fast, slow) in cases(np.random.default_rng(args.seed)).items():
        a, b = best_of(fast, args.repeat), best_of(slow, args.repeat)
        rows.append({"kernel": name, "numba_s": a, "numpy_s": b, "speedup": b / a})
        print(f"{name:34s} {a * 1e3:10.3f} {b * 1e3:10.3f} {b / a:7.1f}x")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
