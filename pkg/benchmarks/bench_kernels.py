"""Benchmark: compiled partition kernel vs the pure-numpy fallback.

Run with ``python benchmarks/bench_kernels.py``. Also verifies that both
backends fill bit-identical DP tables before timing them.
"""

import time

import numpy as np

from classblocks import _kernels_py
from classblocks.seriation import _density_table

try:
    from classblocks import _kernels as compiled
except ImportError:
    compiled = None


def make_table(n: int, b: int):
    table = np.full((n + 1, b + 1), -np.inf, dtype=np.float64)
    table[n, 0] = 0.0
    return table


def run(fill, dens, n, b, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        table = make_table(n, b)
        t0 = time.perf_counter()
        fill(dens, n, b, table)
        best = min(best, time.perf_counter() - t0)
    return best, table


def main():
    rng = np.random.default_rng(7)
    print(f"{'n':>6} {'b':>3} {'numpy (s)':>12} {'compiled (s)':>12} {'speedup':>8}")
    for n, b in [(200, 8), (500, 8), (1000, 8), (1000, 16), (2000, 8)]:
        counts = rng.integers(0, 5, size=(n, n))
        dens = _density_table(counts)
        t_py, table_py = run(_kernels_py.fill_partition_table, dens, n, b)
        if compiled is None:
            print(f"{n:>6} {b:>3} {t_py:>12.4f} {'-':>12} {'-':>8}")
            continue
        t_c, table_c = run(compiled.fill_partition_table, dens, n, b)
        assert np.array_equal(table_py, table_c), "backends disagree"
        print(f"{n:>6} {b:>3} {t_py:>12.4f} {t_c:>12.4f} {t_py / t_c:>7.1f}x")


if __name__ == "__main__":
    main()
