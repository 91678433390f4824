"""Pure-numpy fallback for the compiled partition kernel.

Kept semantically and numerically identical to ``_kernels.pyx``: candidate
scores are formed as ``density[i][t] + table[t][k-1]`` (elementwise float64
add, then max), so both backends fill bit-identical tables.
"""

import numpy as np


def fill_partition_table(density, n, b, table):
    for i in range(n - 1, -1, -1):
        kmax = min(b, n - i)
        for k in range(1, kmax + 1):
            tmax = n - (k - 1)
            cand = density[i, i + 1 : tmax + 1] + table[i + 1 : tmax + 1, k - 1]
            table[i, k] = np.max(cand)
