"""Benchmark the numba kernels against their pure-numpy twins.

Times the three hot kernels (nearest neighbors, exact assignment, auction
assignment) and the end-to-end pairwise transport distance on both backends,
then prints a table of medians and speedups. The pure-numpy backend is the
one selected by PCEVAL_NUMBA=0. Nearest-neighbor and exact-assignment
results are bit-identical across backends and the auction is certified to
the same tolerance on both, so this script is about speed only.

Usage:
    python benchmarks/bench_kernels.py [--repeats N] [--seed S]
"""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from pceval import kernels
from pceval.distances import EmdConfig, emd


def _time(fn, repeats: int) -> float:
    fn()  # warm-up: JIT compilation and cache effects stay out of the medians
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples)


def _cases(seed: int):
    rng = np.random.default_rng(seed)
    cases = []
    for n in (1024, 4096, 8192):
        q = rng.uniform(-1.0, 1.0, size=(n, 3))
        r = rng.uniform(-1.0, 1.0, size=(n, 3))
        cases.append((f"nearest_neighbors n={n}", lambda q=q, r=r: kernels.nearest_neighbors(q, r)))
    for n in (128, 256, 512):
        a = rng.uniform(-1.0, 1.0, size=(n, 3))
        b = rng.uniform(-1.0, 1.0, size=(n, 3))
        cost = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)
        cases.append((f"solve_assignment n={n}", lambda c=cost: kernels.solve_assignment(c)))
    for n in (1024, 2048):
        a = rng.uniform(-1.0, 1.0, size=(n, 3))
        b = rng.uniform(-1.0, 1.0, size=(n, 3))
        cost = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)
        cases.append(
            (f"auction rel_tol=1e-3 n={n}", lambda c=cost: kernels.solve_assignment_auction(c))
        )
    for n, label in ((256, "exact path"), (1024, "auction path")):
        a = rng.uniform(-1.0, 1.0, size=(n, 3))
        b = rng.uniform(-1.0, 1.0, size=(n, 3))
        cases.append((f"emd n={n} ({label})", lambda a=a, b=b: emd(a, b, EmdConfig())))
    return cases


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=3, help="timed runs per case")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    timings: dict[str, dict[str, float]] = {}
    backends = []
    for backend in ("numba", "numpy"):
        kernels.set_backend(backend)
        if kernels.active_backend() != backend:
            print(f"backend {backend!r} unavailable, skipping")
            kernels.set_backend(None)
            continue
        backends.append(backend)
        for name, fn in _cases(args.seed):
            timings.setdefault(name, {})[backend] = _time(fn, args.repeats)
    kernels.set_backend(None)

    width = max(len(name) for name in timings)
    header = f"{'case':<{width}}  " + "  ".join(f"{b:>10}" for b in backends)
    if len(backends) == 2:
        header += f"  {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, per_backend in timings.items():
        row = f"{name:<{width}}  "
        row += "  ".join(f"{per_backend[b] * 1e3:>8.2f}ms" for b in backends)
        if len(backends) == 2:
            row += f"  {per_backend['numpy'] / per_backend['numba']:>7.1f}x"
        print(row)


if __name__ == "__main__":
    main()
