#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-Python fallback.

Usage: python benchmarks/bench_kernels.py [--repeat N]

Covers the three hot paths: expression-program evaluation over a time
grid (closed-form models), fixed-step RK4 integration (ODE models and
their sensitivity systems), and column-wise mask centroids (digitizer).
"""

import argparse
import time

import numpy as np

from creepdb import digitizer as dg
from creepdb import expr as ex
from creepdb import kernels


def timeit(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_eval(impl, n=200_000):
    prog = ex.compile_program(
        ex.parse_expression("A*sigma^n*exp(-Q/(R*T)) * t^m + th1*(1 - exp(-th2*t))"),
        ["A", "sigma", "n", "Q", "R", "T", "m", "th1", "th2", "t"],
    )
    ts = np.linspace(1.0, 3600.0, n)
    values = {
        "A": 2.76e6, "sigma": 31.6, "n": 5.0, "Q": 0.3, "R": 8.314e-6,
        "T": 873.15, "m": 0.4, "th1": 0.02, "th2": 1e-3, "t": ts,
    }
    return lambda: kernels.eval_over(prog, values, n, impl=impl)


def bench_rk4(impl, steps=20_000):
    var_order = ["t", "x", "v", "delta", "alpha", "beta", "gamma", "omega"]
    progs = [
        ex.compile_program(ex.parse_expression("v"), var_order),
        ex.compile_program(
            ex.parse_expression("gamma*cos(omega*t) - delta*v - alpha*x - beta*x^3"),
            var_order,
        ),
    ]
    consts = [0.3, -1.0, 1.0, 0.5, 1.2]
    return lambda: kernels.rk4(progs, [1.0, 0.0], consts, 0.0, 60.0, steps, impl=impl)


def bench_centroids(impl):
    rng = np.random.default_rng(0)
    pts = np.column_stack([np.linspace(0, 1000, 400), np.linspace(0.1, 1.9, 400)])
    spec = dg.SyntheticPlotSpec(
        x_range=(0, 1000), y_range=(0, 2),
        series=(dg.SeriesSpec((220, 30, 30), pts, 3, "s"),),
    )
    rp = dg.render_synthetic_plot(spec, rng)
    mask = dg.color_mask(rp.image, (220, 30, 30))
    h, w = mask.shape
    return lambda: kernels.column_centroids(mask, 80, w - 40, 40, h - 70, impl=impl)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    backends = {}
    try:
        backends["compiled"] = kernels.get_backend("compiled")
    except ImportError:
        print("compiled backend not available")
    backends["pure-python"] = kernels.get_backend("pure-python")

    cases = {
        "eval 200k pts": bench_eval,
        "rk4 20k steps": bench_rk4,
        "centroids 780x530": bench_centroids,
    }
    results = {}
    for cname, make in cases.items():
        for bname, impl in backends.items():
            results[(cname, bname)] = timeit(make(impl), args.repeat)

    width = max(len(c) for c in cases) + 2
    header = f"{'kernel':<{width}}" + "".join(f"{b:>14}" for b in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for cname in cases:
        row = f"{cname:<{width}}"
        times = [results[(cname, b)] for b in backends]
        row += "".join(f"{t * 1e3:>11.2f} ms" for t in times)
        if len(times) == 2:
            row += f"{times[1] / times[0]:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
