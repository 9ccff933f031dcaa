"""Benchmark the compiled kernels against the pure NumPy fallback.

Times the four hot-path kernels (sliding window min/max, quantitative
until, and grid segment costing) on both backends, checks that they agree
bitwise on the benchmark inputs, and prints a speedup table.

Usage:
    python3 benchmarks/bench_kernels.py [--trace-len N] [--repeats K]
"""

import argparse
import time

import numpy as np

from stlnav.kernels import _fallback

try:
    from stlnav.kernels import _core
except ImportError:
    _core = None


def best_of(repeats, func, *args):
    best = float("inf")
    result = None
    for _ in range(repeats):
        start = time.perf_counter()
        result = func(*args)
        best = min(best, time.perf_counter() - start)
    return best, result


def bench_case(name, repeats, func_name, args):
    pure_fn = getattr(_fallback, func_name)
    pure_time, pure_out = best_of(repeats, pure_fn, *args)
    if _core is None:
        print(f"{name:<28} pure {pure_time * 1e6:9.1f} us   (no compiled core)")
        return
    core_fn = getattr(_core, func_name)
    core_time, core_out = best_of(repeats, core_fn, *args)
    if isinstance(pure_out, np.ndarray):
        agree = np.array_equal(pure_out, core_out)
    else:
        agree = pure_out == core_out
    flag = "" if agree else "  MISMATCH"
    print(
        f"{name:<28} pure {pure_time * 1e6:9.1f} us   "
        f"compiled {core_time * 1e6:9.1f} us   "
        f"x{pure_time / core_time:6.2f}{flag}"
    )


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--trace-len", type=int, default=2000,
                        help="robustness signal length (default 2000)")
    parser.add_argument("--grid", type=int, default=400,
                        help="cost grid side length (default 400)")
    parser.add_argument("--repeats", type=int, default=20,
                        help="timing repeats, best-of (default 20)")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    n = args.trace_len
    signal = rng.standard_normal(n)
    other = rng.standard_normal(n)
    grid = rng.random((args.grid, args.grid)) * 10.0

    print(f"trace length {n}, grid {args.grid}x{args.grid}, "
          f"best of {args.repeats} repeats")
    if _core is None:
        print("compiled core not importable; timing the fallback only")
    print()

    bench_case("window_min[0,20]", args.repeats, "window_min", (signal, 0, 20))
    bench_case("window_min[0,inf]", args.repeats, "window_min", (signal, 0, -1))
    bench_case("window_max[2,40]", args.repeats, "window_max", (signal, 2, 40))
    bench_case("until[0,20]", args.repeats, "until_robustness",
               (signal, other, 0, 20))
    bench_case("until[0,inf]", args.repeats, "until_robustness",
               (signal, other, 0, -1))
    bench_case("segment_cost (long probe)", args.repeats, "segment_cost",
               (grid, 0.6, 0.7, args.grid * 0.5 - 1.0, args.grid * 0.5 - 2.0,
                0.5, 1e6, 1.0))


if __name__ == "__main__":
    main()
