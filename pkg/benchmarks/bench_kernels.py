"""Time each hot kernel under the compiled and the numpy backend.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--scale 1.0]

Each row reports the best-of-``repeat`` wall time per backend and the
speedup; outputs are checked for equality before timing.
"""

import argparse
import time

import numpy as np

from groupaffect import _backend
from groupaffect.centrist import pyramid_blocks


def cases(scale, rng):
    img = rng.integers(0, 256, size=(480, 640)).astype(np.uint8)
    codes = _backend.get_kernels("python").census_transform(img)
    blocks = pyramid_blocks(*codes.shape)
    n = max(10, int(20000 * scale))
    X, C = rng.normal(size=(n, 64)), rng.normal(size=(256, 64))
    m = max(10, int(2000 * scale))
    F = rng.normal(size=(m, 40))
    order = np.argsort(F, axis=0, kind="stable")
    Fs = np.take_along_axis(F, order, axis=0)
    y = rng.integers(0, 3, size=m)
    w = rng.integers(0, 3, size=m).astype(np.float64)
    g, h = rng.normal(size=m), rng.uniform(0.05, 0.25, size=m)
    thr = rng.normal(size=40)
    depth = 10
    n_nodes = 2 ** (depth + 1) - 1
    internal = 2 ** depth - 1
    feature = np.full(n_nodes, -1)
    feature[:internal] = rng.integers(0, 40, size=internal)
    left, right = np.full(n_nodes, -1), np.full(n_nodes, -1)
    left[:internal] = 2 * np.arange(internal) + 1
    right[:internal] = 2 * np.arange(internal) + 2
    threshold = np.zeros(n_nodes)
    threshold[:internal] = rng.normal(size=internal)
    R = rng.normal(size=(max(10, int(50000 * scale)), 40))
    return [
        ("census_transform 640x480", "census_transform", (img,)),
        ("block_histograms 31 blocks", "block_histograms", (codes, blocks)),
        (f"nearest_centroid {n}x256x64", "nearest_centroid", (X, C)),
        (f"gini_best_split {m}x40", "gini_best_split", (Fs, y[order], w[order], 3, 1)),
        (f"gini_threshold_scores {m}x40", "gini_threshold_scores", (F, y, w, thr, 3, 1)),
        (f"newton_best_split {m}x40", "newton_best_split", (Fs, g[order], h[order], 1.0, 1)),
        (f"tree_apply {len(R)} rows depth {depth}", "tree_apply", (R, feature, threshold, left, right)),
    ]


def best_time(fn, args, repeat):
    best = np.inf
    for _ in range(repeat):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--scale", type=float, default=1.0, help="multiplier on problem sizes")
    args = parser.parse_args(argv)
    if "cython" not in _backend.available_backends():
        parser.exit(1, "compiled kernels are not built; reinstall with a C compiler available\n")
    py, cy = _backend.get_kernels("python"), _backend.get_kernels("cython")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<40} {'python ms':>10} {'cython ms':>10} {'speedup':>8}")
    for label, name, call_args in cases(args.scale, rng):
        f_py, f_cy = getattr(py, name), getattr(cy, name)
        if not same(f_py(*call_args), f_cy(*call_args)):
            raise SystemExit(f"{name}: backends disagree")
        t_py, t_cy = best_time(f_py, call_args, args.repeat), best_time(f_cy, call_args, args.repeat)
        print(f"{label:<40} {1e3 * t_py:>10.2f} {1e3 * t_cy:>10.2f} {t_py / t_cy:>7.1f}x")


if __name__ == "__main__":
    main()
