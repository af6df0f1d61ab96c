"""Benchmark the numba kernels against the pure-numpy fallbacks.

Two views:

* microbenchmark of the similarity kernels across centroid-matrix sizes,
  running both implementations in-process (needs numba importable);
* end-to-end streaming throughput, one subprocess per backend selected
  via LINKS_KERNELS, since the backend is fixed at import time.

Usage: python benchmarks/bench_kernels.py [--trials N] [--skip-stream]
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from links_clustering import kernels

SIZES = (16, 64, 256, 1024, 4096)
DIM = 128

STREAM_CODE = """
import time
import numpy as np
from links_clustering import LinksClusterer, LinksConfig, kernels
from links_clustering.hypersphere import GenerativeParams, generate_labeled_stream

params = GenerativeParams(dimension=128, sigma=0.05, num_clusters=40,
                          points_per_cluster=200, seed=123)
stream = [v for _, v in generate_labeled_stream(params)]
clusterer = LinksClusterer(LinksConfig(dimension=128, tc=0.84, ts=0.80, tp=0.95))
for v in stream[:8]:  # the second add reaches the scan kernel: JIT happens here
    clusterer.add_vector(v)
start = time.perf_counter()
for v in stream[8:]:
    clusterer.add_vector(v)
elapsed = time.perf_counter() - start
print(f"{kernels.BACKEND}: {len(stream) - 8} adds in {elapsed:.2f}s "
      f"({(len(stream) - 8) / elapsed:,.0f} vectors/s), "
      f"{clusterer.stats().num_subclusters} subclusters")
"""


def _time(fn, trials: int) -> float:
    fn()  # warmup / JIT
    start = time.perf_counter()
    for _ in range(trials):
        fn()
    return (time.perf_counter() - start) / trials * 1e6


def bench_micro(trials: int) -> None:
    if kernels.best_dot_numba is None:
        print("numba backend unavailable (LINKS_KERNELS=numpy or numba not installed);")
        print("microbenchmark needs both implementations in one process.")
        return
    rng = np.random.default_rng(0)
    print(f"{'rows':>6}  {'best_dot numba':>15}  {'best_dot numpy':>15}  "
          f"{'pair_dots numba':>16}  {'pair_dots numpy':>16}")
    for rows in SIZES:
        mat = rng.standard_normal((rows, DIM))
        mat /= np.linalg.norm(mat, axis=1, keepdims=True)
        x = mat[rows // 2].copy()
        n_pairs = min(4 * rows, 4096)
        ri = rng.integers(0, rows, size=n_pairs).astype(np.int64)
        rj = rng.integers(0, rows, size=n_pairs).astype(np.int64)
        t_bn = _time(lambda: kernels.best_dot_numba(mat, x), trials)
        t_bp = _time(lambda: kernels.best_dot_numpy(mat, x), trials)
        t_pn = _time(lambda: kernels.pair_dots_numba(mat, ri, rj), trials)
        t_pp = _time(lambda: kernels.pair_dots_numpy(mat, ri, rj), trials)
        print(f"{rows:>6}  {t_bn:>12.1f} us  {t_bp:>12.1f} us  "
              f"{t_pn:>13.1f} us  {t_pp:>13.1f} us")


def bench_stream() -> None:
    print("\nstreaming throughput (8000 adds, 128-dim, one subprocess per backend):")
    for backend in ("numba", "numpy"):
        env = dict(os.environ, LINKS_KERNELS=backend)
        proc = subprocess.run(
            [sys.executable, "-c", STREAM_CODE],
            capture_output=True, text=True, env=env,
        )
        if proc.returncode != 0:
            print(f"{backend}: failed ({proc.stderr.strip().splitlines()[-1]})")
        else:
            print(" ", proc.stdout.strip())


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trials", type=int, default=500)
    parser.add_argument("--skip-stream", action="store_true")
    args = parser.parse_args()
    print(f"active backend: {kernels.BACKEND}")
    bench_micro(args.trials)
    if not args.skip_stream:
        bench_stream()


if __name__ == "__main__":
    main()
