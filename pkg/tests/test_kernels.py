import numpy as np
import pytest

from classblocks import _kernels_py
from classblocks.kernels import KERNEL_BACKEND
from classblocks.seriation import _density_table

compiled = pytest.importorskip("classblocks._kernels",
                               reason="compiled kernel not built")


def fill(backend, dens, n, b):
    table = np.full((n + 1, b + 1), -np.inf, dtype=np.float64)
    table[n, 0] = 0.0
    backend.fill_partition_table(dens, n, b, table)
    return table


def test_backend_selected():
    assert KERNEL_BACKEND in ("compiled", "python")


def test_tables_bit_identical_across_backends():
    rng = np.random.default_rng(123)
    for _ in range(25):
        n = int(rng.integers(2, 40))
        b = int(rng.integers(1, min(n, 6) + 1))
        dens = _density_table(rng.integers(0, 9, size=(n, n)))
        t_py = fill(_kernels_py, dens, n, b)
        t_c = fill(compiled, dens, n, b)
        assert np.array_equal(t_py, t_c, equal_nan=True)


def test_large_instance_agreement():
    rng = np.random.default_rng(5)
    n, b = 300, 6
    dens = _density_table(rng.integers(0, 4, size=(n, n)))
    assert np.array_equal(fill(_kernels_py, dens, n, b), fill(compiled, dens, n, b))
