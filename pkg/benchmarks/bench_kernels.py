#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-Python fallback.

Times the three hot loops on synthetic data, then an end-to-end analysis of
the bundled credit fixture under both implementations. Selection is by the
FAIRCERT_FORCE_PY environment variable, so the end-to-end comparison re-runs
this script in a subprocess.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import os
import random
import subprocess
import sys
import time
from fractions import Fraction as F
from pathlib import Path

from faircert import _kernels_py

try:
    from faircert import _speedups
except ImportError:
    _speedups = None

ROOT = Path(__file__).resolve().parent.parent


def rand_frac(rng):
    return F(rng.randint(-50, 50), rng.randint(1, 20))


def bench(fn, args_factory, repeat):
    best = None
    for _ in range(repeat):
        args = args_factory()
        t0 = time.perf_counter()
        fn(*args)
        dt = time.perf_counter() - t0
        best = dt if best is None else min(best, dt)
    return best


def micro(repeat):
    rng = random.Random(0)
    k, width = 8, 64
    weights = [rand_frac(rng) for _ in range(k)]
    rows = [[rand_frac(rng) for _ in range(width)] for _ in range(k)]
    bias = [rand_frac(rng) for _ in range(width)]
    coeffs = [rand_frac(rng) for _ in range(width)]
    los = [rand_frac(rng) for _ in range(width)]
    his = [lo + abs(rand_frac(rng)) + 1 for lo in los]
    tab = [[rand_frac(rng) or F(1) for _ in range(40)] for _ in range(30)]

    try:
        from gmpy2 import mpq
    except ImportError:
        mpq = F

    def lp_instance():
        # the shape the analyzer's LPs take: mpq tableau, slack basis
        r = random.Random(7)
        n, width = 24, 60
        data = []
        for i in range(n):
            row = [mpq(r.randint(-9, 9), r.randint(1, 6)) for _ in range(width)]
            row[-1] = mpq(abs(r.randint(0, 40)), 1)
            data.append(row)
        data.append([mpq(r.randint(-5, 5)) for _ in range(width)])
        return (data, list(range(width - n - 1, width - 1)), width - 1)

    cases = [
        ("combine_dense", lambda impl: bench(
            impl.combine_dense, lambda: (weights, rows, bias), repeat)),
        ("interval_dense", lambda impl: bench(
            impl.interval_dense, lambda: (coeffs, F(0), los, his), repeat)),
        ("pivot_dense", lambda impl: bench(
            impl.pivot_dense, lambda: ([list(r) for r in tab], 3, 5), repeat)),
        ("simplex_optimize[mpq]", lambda impl: bench(
            impl.simplex_optimize, lp_instance, max(repeat // 4, 10))),
    ]
    print(f"{'kernel':<22} {'python':>12} {'cython':>12} {'speedup':>9}")
    for name, runner in cases:
        t_py = runner(_kernels_py)
        if _speedups is None:
            print(f"{name:<22} {t_py * 1e6:>10.1f}us {'n/a':>12} {'-':>9}")
            continue
        t_cy = runner(_speedups)
        print(f"{name:<22} {t_py * 1e6:>10.1f}us {t_cy * 1e6:>10.1f}us {t_py / t_cy:>8.2f}x")


END_TO_END = """
import time
from fractions import Fraction as F
from faircert.model import parse_model, parse_spec
from faircert.preanalysis import Partition, BudgetConfig
from faircert.analysis import run_analysis
from faircert import kernels
from tests.helpers.netgen import random_net

m = parse_model(open('tests/fixtures/andgate.net','rb').read())
spec = parse_spec(open('tests/fixtures/andgate.spec','rb').read())
t0 = time.perf_counter()
for _ in range(3):
    run_analysis(m, spec, [Partition.initial(spec)], 'boxes', BudgetConfig(F(1,4), 1))
credit = (time.perf_counter() - t0) / 3
m3, spec3 = random_net(3)
t0 = time.perf_counter()
run_analysis(m3, spec3, [Partition.initial(spec3)], 'boxes', BudgetConfig(F(0), m3.n_hidden))
heavy = time.perf_counter() - t0
print(f"{kernels.IMPLEMENTATION}: credit fixture {credit:.3f}s, "
      f"LP-heavy random net {heavy:.3f}s")
"""


def end_to_end():
    for force in ("0", "1"):
        env = dict(os.environ, FAIRCERT_FORCE_PY=force)
        subprocess.run([sys.executable, "-c", END_TO_END], cwd=ROOT, env=env, check=True)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args()
    print("== micro-kernels ==")
    micro(args.repeat)
    print("\n== end-to-end (credit fixture, boxes, U=1, L=1/4) ==")
    end_to_end()


if __name__ == "__main__":
    main()
