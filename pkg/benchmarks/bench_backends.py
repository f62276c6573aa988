"""Benchmark the compiled kernels against the NumPy fallback.

Runs each hot kernel on a ladder of sizes with both backends and prints
a tab-separated table of best-of-N wall times and the speedup.  Usage:

    python3 benchmarks/bench_backends.py [--repeats N]
"""

import argparse
import time

import numpy as np

from krescale import _kernels_py

try:
    from krescale import _kernels
except ImportError:
    _kernels = None


def best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_dft3(rng, shape):
    field = np.ascontiguousarray(
        rng.uniform(-1, 1, shape) + 1j * rng.uniform(-1, 1, shape)
    )
    return lambda impl: impl.dft3(field)


def bench_circular(rng, shape):
    inp = np.ascontiguousarray(rng.uniform(-1, 1, shape))
    ker = np.ascontiguousarray(rng.uniform(-1, 1, shape))
    return lambda impl: impl.circular_conv2(inp, ker)


def bench_conv2d(rng, shape):
    h, w, cin = shape
    inp = np.ascontiguousarray(rng.uniform(-1, 1, (h, w, cin)))
    weights = np.ascontiguousarray(rng.uniform(-1, 1, (8, cin, 3, 3)))
    return lambda impl: impl.conv2d_forward(inp, weights, 1, 1, 1, 1)


CASES = (
    ("dft3", bench_dft3, ((8, 8, 2), (16, 16, 3), (24, 24, 4))),
    ("circular_conv2", bench_circular, ((16, 16, 2), (32, 32, 3), (48, 48, 4))),
    ("conv2d_forward", bench_conv2d, ((32, 32, 4), (64, 64, 8), (128, 128, 8))),
)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    print("kernel\tsize\tpython_s\tcompiled_s\tspeedup")
    for name, make, shapes in CASES:
        for shape in shapes:
            call = make(rng, shape)
            size = "x".join(str(d) for d in shape)
            t_py = best_of(lambda: call(_kernels_py), args.repeats)
            if _kernels is None:
                print(f"{name}\t{size}\t{t_py:.6f}\tn/a\tn/a")
                continue
            np.testing.assert_allclose(
                np.asarray(call(_kernels)),
                np.asarray(call(_kernels_py)),
                rtol=1e-12,
                atol=1e-12,
            )
            t_c = best_of(lambda: call(_kernels), args.repeats)
            print(f"{name}\t{size}\t{t_py:.6f}\t{t_c:.6f}\t{t_py / t_c:.2f}x")


if __name__ == "__main__":
    main()
