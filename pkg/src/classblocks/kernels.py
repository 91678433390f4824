"""Selects the partition-DP kernel backend at import time.

The compiled extension is preferred; environments without a working build
fall back to the numpy implementation transparently. ``KERNEL_BACKEND``
reports which one is active (``benchmarks/bench_kernels.py`` compares them).
"""

try:
    from classblocks._kernels import fill_partition_table

    KERNEL_BACKEND = "compiled"
except ImportError:  # pragma: no cover - depends on build environment
    from classblocks._kernels_py import fill_partition_table

    KERNEL_BACKEND = "python"

__all__ = ["fill_partition_table", "KERNEL_BACKEND"]
