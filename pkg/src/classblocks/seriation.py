"""Confusion-matrix seriation and diagonal block partitioning.

Orderings operate on the symmetrized off-diagonal confusion
``S = offdiag(C) + offdiag(C)^T`` so rows and columns can share one
permutation. Block density is off-diagonal in-block mass over off-diagonal
in-block area; the partition objective is the sum of block densities,
solved exactly by dynamic programming with ties broken toward the
lexicographically smallest boundary vector.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .datamodel import ClassHierarchy, hierarchy_from_json
from .errors import SolverError
from .kernels import fill_partition_table
from .metrics import ConfusionMatrix

ALGORITHMS = ("spectral", "barycenter")

_BARYCENTER_MAX_ITERS = 100


@dataclass(frozen=True)
class SeriationRequest:
    algorithm: str
    scope: tuple[int, int] | None = None

    def validate(self, n: int) -> tuple[int, int]:
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")
        return _check_scope(self.scope, n)


@dataclass(frozen=True)
class PartitionRequest:
    b: int

    def validate(self, n: int) -> None:
        if not (1 <= self.b <= n):
            raise ValueError(f"block count {self.b} outside 1..{n}")


@dataclass(frozen=True)
class BlockPartition:
    """b-1 cut positions (start index of each block after the first)."""

    boundaries: tuple[int, ...]
    score: float
    n: int

    @property
    def b(self) -> int:
        return len(self.boundaries) + 1

    def ranges(self) -> list[tuple[int, int]]:
        edges = (0,) + self.boundaries + (self.n,)
        return [(edges[i], edges[i + 1]) for i in range(len(edges) - 1)]

    def labels(self) -> np.ndarray:
        """Block index of every position."""
        out = np.zeros(self.n, dtype=np.int64)
        for blk, (lo, hi) in enumerate(self.ranges()):
            out[lo:hi] = blk
        return out


def _check_scope(scope, n: int) -> tuple[int, int]:
    if scope is None:
        scope = (0, n)
    start, stop = int(scope[0]), int(scope[1])
    if not (0 <= start < stop <= n):
        raise ValueError(f"scope {scope} outside matrix of size {n}")
    if stop - start < 2:
        raise ValueError("scope must cover at least 2 classes")
    return start, stop


def symmetrized_offdiag(counts: np.ndarray) -> np.ndarray:
    S = counts.astype(np.float64)
    S = S + S.T
    np.fill_diagonal(S, 0.0)
    return S


def _connected_components(S: np.ndarray) -> list[list[int]]:
    """Components of the positive-weight graph, ordered by first member."""
    m = S.shape[0]
    seen = np.zeros(m, dtype=bool)
    comps: list[list[int]] = []
    for start in range(m):
        if seen[start]:
            continue
        comp = []
        queue = deque([start])
        seen[start] = True
        while queue:
            v = queue.popleft()
            comp.append(v)
            for u in np.flatnonzero(S[v] > 0):
                if not seen[u]:
                    seen[u] = True
                    queue.append(int(u))
        comps.append(sorted(comp))
    return comps


def _fiedler_vector(S: np.ndarray) -> np.ndarray:
    """Eigenvector of the second-smallest eigenvalue of L = D - S."""
    L = np.diag(S.sum(axis=1)) - S
    try:
        _, vecs = np.linalg.eigh(L)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"eigendecomposition failed: {exc}") from exc
    return vecs[:, 1]


def spectral_axis_order(S: np.ndarray, tiebreak: Sequence[int]) -> list[int]:
    """Order indices 0..m-1 by Fiedler-vector components of the similarity S.

    Disconnected components are ordered independently and laid out by first
    occurrence, so a zero similarity keeps the input order. The vector sign
    is canonicalized toward the input order; exact component ties fall back
    to ascending ``tiebreak``.
    """
    out: list[int] = []
    for comp in _connected_components(S):
        if len(comp) == 1:
            out.extend(comp)
            continue
        sub = S[np.ix_(comp, comp)]
        f = _fiedler_vector(sub)
        pos = np.arange(len(comp), dtype=np.float64)
        if np.dot(f, pos - pos.mean()) < 0:
            f = -f
        ranked = sorted(range(len(comp)), key=lambda i: (f[i], tiebreak[comp[i]]))
        out.extend(comp[i] for i in ranked)
    return out


def _scope_permutation(counts_scope: np.ndarray, ids: Sequence[int],
                       algorithm: str) -> list[int]:
    S = symmetrized_offdiag(counts_scope)
    if algorithm == "spectral":
        return spectral_axis_order(S, tiebreak=list(ids))
    if algorithm == "barycenter":
        return _barycenter_permutation(S)
    raise ValueError(f"algorithm must be one of {ALGORITHMS}")


def _barycenter_permutation(S: np.ndarray) -> list[int]:
    """Iterated symmetric barycenter ordering of indices 0..m-1.

    Each round scores a class by the mean of its current position and the
    mass-weighted mean position of its confusions, then stable-sorts. The
    self-position term damps the two-cycles the raw update falls into, so
    block-contiguous inputs are genuine fixed points.
    """
    m = S.shape[0]
    perm = np.arange(m)
    pos = np.arange(m, dtype=np.float64)
    weight = S.sum(axis=1)
    for _ in range(_BARYCENTER_MAX_ITERS):
        with np.errstate(invalid="ignore", divide="ignore"):
            bary = np.where(weight > 0, (S @ pos) / weight, pos)
        score = 0.5 * (pos + bary)
        new_perm = np.lexsort((pos, score))
        if np.array_equal(new_perm, perm):
            break
        perm = new_perm
        new_pos = np.empty(m, dtype=np.float64)
        new_pos[perm] = np.arange(m, dtype=np.float64)
        pos = new_pos
    return [int(i) for i in perm]


def _reordered(matrix: ConfusionMatrix, start: int, stop: int,
               perm: Sequence[int]) -> tuple[int, ...]:
    ids = matrix.order[start:stop]
    return matrix.order[:start] + tuple(ids[i] for i in perm) + matrix.order[stop:]


def spectral_order(matrix: ConfusionMatrix,
                   scope: tuple[int, int] | None = None) -> tuple[int, ...]:
    """New display order with the scope reordered along the Fiedler axis."""
    start, stop = _check_scope(scope, matrix.n)
    sub = matrix.counts[start:stop, start:stop]
    perm = _scope_permutation(sub, matrix.order[start:stop], "spectral")
    return _reordered(matrix, start, stop, perm)


def barycenter_order(matrix: ConfusionMatrix,
                     scope: tuple[int, int] | None = None) -> tuple[int, ...]:
    """New display order from the iterated barycenter heuristic."""
    start, stop = _check_scope(scope, matrix.n)
    sub = matrix.counts[start:stop, start:stop]
    perm = _scope_permutation(sub, matrix.order[start:stop], "barycenter")
    return _reordered(matrix, start, stop, perm)


def seriate(matrix: ConfusionMatrix, algorithm: str,
            scope: tuple[int, int] | None = None) -> tuple[int, ...]:
    if algorithm == "spectral":
        return spectral_order(matrix, scope)
    if algorithm == "barycenter":
        return barycenter_order(matrix, scope)
    raise ValueError(f"algorithm must be one of {ALGORITHMS}")


# ---------------------------------------------------------------------------
# block partitioning


def _density_table(counts: np.ndarray) -> np.ndarray:
    """density[i][j] of the diagonal square [i, j); zero for single classes."""
    n = counts.shape[0]
    P = np.zeros((n + 1, n + 1), dtype=np.float64)
    P[1:, 1:] = counts.astype(np.float64).cumsum(axis=0).cumsum(axis=1)
    corner = np.diag(P)
    rect = corner[None, :] + corner[:, None] - P - P.T
    dsum = np.concatenate([[0.0], np.diag(counts).astype(np.float64).cumsum()])
    mass = rect - (dsum[None, :] - dsum[:, None])
    sizes = np.arange(n + 1, dtype=np.float64)
    s = sizes[None, :] - sizes[:, None]
    denom = s * s - s
    with np.errstate(invalid="ignore", divide="ignore"):
        dens = np.where(s >= 2, mass / np.where(denom > 0, denom, 1.0), 0.0)
    return np.ascontiguousarray(dens)


def partition_counts(counts: np.ndarray, b: int) -> BlockPartition:
    """Optimal b-block partition of an already-ordered counts matrix."""
    n = counts.shape[0]
    if not (1 <= b <= n):
        raise ValueError(f"block count {b} outside 1..{n}")
    dens = _density_table(counts)
    table = np.full((n + 1, b + 1), -np.inf, dtype=np.float64)
    table[n, 0] = 0.0
    fill_partition_table(dens, n, b, table)
    boundaries: list[int] = []
    i, k = 0, b
    while k > 1:
        for t in range(i + 1, n - (k - 1) + 2):
            if dens[i, t] + table[t, k - 1] == table[i, k]:
                boundaries.append(t)
                i, k = t, k - 1
                break
        else:  # pragma: no cover - table is always reconstructible
            raise SolverError("partition table reconstruction failed")
    return BlockPartition(boundaries=tuple(boundaries), score=float(table[0, b]), n=n)


def partition_blocks(matrix: ConfusionMatrix, b: int) -> BlockPartition:
    """Partition the diagonal into b blocks maximizing summed density."""
    return partition_counts(np.asarray(matrix.counts), b)


def block_outliers(matrix: ConfusionMatrix,
                   partition: BlockPartition) -> list[tuple[int, int, int]]:
    """Non-zero off-diagonal cells crossing block borders, heaviest first."""
    if partition.n != matrix.n:
        raise ValueError("partition does not match matrix size")
    labels = partition.labels()
    rows, cols = np.nonzero(matrix.counts)
    hits = [(int(matrix.counts[r, c]), int(r), int(c))
            for r, c in zip(rows, cols)
            if r != c and labels[r] != labels[c]]
    hits.sort(key=lambda t: (-t[0], t[1], t[2]))
    return [(matrix.order[r], matrix.order[c], v) for v, r, c in hits]


# ---------------------------------------------------------------------------
# recursive hierarchy construction


def build_hierarchy_recursive(matrix: ConfusionMatrix, algorithm: str = "spectral",
                              blocks: int | Sequence[int] = 2, max_depth: int = 3,
                              min_block_size: int = 2) -> ClassHierarchy:
    """Construct a class hierarchy by seriating and partitioning recursively.

    Every recursion level seriates its scope, cuts it into blocks and
    recurses into blocks that are large enough while depth remains. The
    result's leaf order is the new class ordering.
    """
    if algorithm not in ALGORITHMS:
        raise ValueError(f"algorithm must be one of {ALGORITHMS}")
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    if min_block_size < 2:
        raise ValueError("min_block_size must be >= 2")
    if isinstance(blocks, int):
        per_level = [blocks]
    else:
        per_level = [int(x) for x in blocks]
    if not per_level or any(x < 1 for x in per_level):
        raise ValueError("blocks must be a positive int or list of positive ints")

    n = matrix.n
    order = list(matrix.order)
    work = np.array(matrix.counts, dtype=np.int64)

    def blocks_at(depth: int) -> int:
        return per_level[depth] if depth < len(per_level) else per_level[-1]

    def leaf(cid: int) -> dict:
        return {"class_id": cid}

    def flat_group(lo: int, hi: int) -> dict:
        return {"children": [leaf(order[p]) for p in range(lo, hi)]}

    def recurse(lo: int, hi: int, depth: int) -> dict:
        size = hi - lo
        if size == 1:
            return leaf(order[lo])
        perm = _scope_permutation(work[lo:hi, lo:hi], order[lo:hi], algorithm)
        order[lo:hi] = [order[lo + i] for i in perm]
        work[lo:hi, :] = work[lo:hi, :][perm, :]
        work[:, lo:hi] = work[:, lo:hi][:, perm]
        part = partition_counts(work[lo:hi, lo:hi], min(blocks_at(depth), size))
        ranges = [(lo + a, lo + b) for a, b in part.ranges()]
        if len(ranges) == 1:
            return flat_group(lo, hi)
        children = []
        for a, b in ranges:
            if b - a == 1:
                children.append(leaf(order[a]))
            elif depth + 1 < max_depth and b - a >= min_block_size:
                children.append(recurse(a, b, depth + 1))
            else:
                children.append(flat_group(a, b))
        return {"children": children}

    tree = leaf(order[0]) if n == 1 else recurse(0, n, 0)
    return hierarchy_from_json(tree, n_classes=n)
