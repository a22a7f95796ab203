"""Benchmark the compiled kernels against the pure-Python fallback.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import time

import numpy as np

from vtforge._kernels import _pykernels

try:
    from vtforge._kernels import _ckernels
except ImportError:
    _ckernels = None


def timeit(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_lsap(impl, size, repeat):
    rng = np.random.default_rng(0)
    cost = rng.random((size, size))
    return timeit(lambda: impl.lsap(cost), repeat)


def bench_bilinear(impl, n_points, repeat):
    rng = np.random.default_rng(1)
    grid_u = rng.random((480, 640))
    grid_v = rng.random((480, 640))
    xs = rng.random(n_points) * 639
    ys = rng.random(n_points) * 479
    return timeit(lambda: impl.bilinear_sample(grid_u, grid_v, xs, ys), repeat)


def bench_clip(impl, n_pairs, repeat):
    rng = np.random.default_rng(2)
    quads = []
    for _ in range(2 * n_pairs):
        pts = rng.random((4, 2)) * 40
        c = pts.mean(axis=0)
        order = np.argsort(np.arctan2(pts[:, 1] - c[1], pts[:, 0] - c[0]))
        quads.append(np.ascontiguousarray(pts[order]))

    def run():
        for i in range(n_pairs):
            impl.convex_clip_area(quads[2 * i], quads[2 * i + 1])

    return timeit(run, repeat)


CASES = [
    ("lsap 20x20", lambda impl, r: bench_lsap(impl, 20, r)),
    ("lsap 100x100", lambda impl, r: bench_lsap(impl, 100, r)),
    ("lsap 300x300", lambda impl, r: bench_lsap(impl, 300, r)),
    ("bilinear 1e5 pts", lambda impl, r: bench_bilinear(impl, 100_000, r)),
    ("bilinear 1e6 pts", lambda impl, r: bench_bilinear(impl, 1_000_000, r)),
    ("clip 1e4 quad pairs", lambda impl, r: bench_clip(impl, 10_000, r)),
]


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    if _ckernels is None:
        print("compiled kernels not built; timing the pure backend only")
    header = f"{'case':<22} {'pure':>12} {'compiled':>12} {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for name, fn in CASES:
        t_pure = fn(_pykernels, args.repeat)
        if _ckernels is not None:
            t_comp = fn(_ckernels, args.repeat)
            print(f"{name:<22} {t_pure * 1e3:>10.2f}ms {t_comp * 1e3:>10.2f}ms "
                  f"{t_pure / t_comp:>8.1f}x")
        else:
            print(f"{name:<22} {t_pure * 1e3:>10.2f}ms {'-':>12} {'-':>9}")


if __name__ == "__main__":
    main()
