# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loop of the block-partition dynamic program."""

from libc.math cimport INFINITY


def fill_partition_table(double[:, ::1] density, Py_ssize_t n, Py_ssize_t b,
                         double[:, ::1] table):
    """Fill ``table[i][k]`` with the best sum of block densities achievable
    when splitting positions ``[i, n)`` into exactly ``k`` blocks.

    ``table`` must arrive initialized to -inf except ``table[n][0] == 0``.
    Candidate scores accumulate right to left as
    ``density[i][t] + table[t][k-1]``; the numpy fallback uses the same
    association, so both backends produce bit-identical tables.
    """
    cdef Py_ssize_t i, k, t, kmax, tmax
    cdef double best, cand
    for i in range(n - 1, -1, -1):
        kmax = b if b < (n - i) else (n - i)
        for k in range(1, kmax + 1):
            best = -INFINITY
            tmax = n - (k - 1)
            for t in range(i + 1, tmax + 1):
                cand = density[i, t] + table[t, k - 1]
                if cand > best:
                    best = cand
            table[i, k] = best
