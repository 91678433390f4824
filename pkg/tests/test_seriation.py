import numpy as np
import pytest

import oracles
from classblocks import (ConfusionMatrix, barycenter_order, block_outliers,
                         build_hierarchy_recursive, partition_blocks,
                         spectral_order)
from classblocks.seriation import BlockPartition, partition_counts


def matrix_from(counts, order=None):
    counts = np.asarray(counts, dtype=np.int64)
    order = tuple(range(counts.shape[0])) if order is None else tuple(order)
    return ConfusionMatrix(order=order, counts=counts)


def planted_counts(rng, labels, within=(20, 40), cross=(0, 2), diag=50):
    n = len(labels)
    C = np.zeros((n, n), dtype=np.int64)
    for i in range(n):
        for j in range(n):
            if i == j:
                C[i, j] = diag
            elif labels[i] == labels[j]:
                C[i, j] = rng.integers(*within)
            else:
                C[i, j] = rng.integers(*cross)
    return C


def contiguous(order, labels):
    seen = [labels[c] for c in order]
    runs = 1
    for a, b in zip(seen, seen[1:]):
        if a != b:
            runs += 1
    return runs == len(set(labels))


class TestSpectralOrder:
    def test_size_two_scope(self):
        m = matrix_from([[5, 2], [3, 5]])
        order = spectral_order(m)
        assert sorted(order) == [0, 1]

    def test_planted_blocks_contiguous(self):
        rng = np.random.default_rng(0)
        labels = [0] * 5 + [1] * 5
        C = planted_counts(rng, labels)
        shuffle = rng.permutation(10)
        m = matrix_from(C[np.ix_(shuffle, shuffle)], order=[int(x) for x in shuffle])
        order = spectral_order(m)
        assert contiguous(order, labels)
        assert sorted(order) == list(range(10))

    def test_zero_offdiagonal_preserves_order(self):
        C = np.diag([5, 5, 5, 5])
        m = matrix_from(C, order=[2, 0, 3, 1])
        assert spectral_order(m) == (2, 0, 3, 1)

    def test_disconnected_components_stay_contiguous(self):
        # classes {0,1} and {2,3} confuse internally, never across
        C = np.array([
            [9, 4, 0, 0],
            [4, 9, 0, 0],
            [0, 0, 9, 7],
            [0, 0, 7, 9],
        ])
        shuffled = [0, 2, 1, 3]
        idx = np.argsort(shuffled)  # position of class c in display
        perm = np.array(shuffled)
        m = matrix_from(C[np.ix_(perm, perm)], order=shuffled)
        order = spectral_order(m)
        comp = {0: 0, 1: 0, 2: 1, 3: 1}
        assert contiguous(order, [comp[c] for c in range(4)])
        # components are laid out by first occurrence in the input order
        assert comp[order[0]] == 0

    def test_scope_only_reorders_inside(self):
        rng = np.random.default_rng(1)
        C = rng.integers(0, 5, size=(6, 6))
        m = matrix_from(C)
        order = spectral_order(m, scope=(2, 6))
        assert order[:2] == (0, 1)
        assert sorted(order[2:]) == [2, 3, 4, 5]

    def test_bad_scope(self):
        m = matrix_from(np.zeros((4, 4), dtype=int))
        with pytest.raises(ValueError):
            spectral_order(m, scope=(3, 4))
        with pytest.raises(ValueError):
            spectral_order(m, scope=(2, 8))

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        C = rng.integers(0, 10, size=(12, 12))
        m = matrix_from(C)
        assert spectral_order(m) == spectral_order(m)


class TestBarycenterOrder:
    def test_block_matrix_is_fixed_point(self):
        # block-contiguous: order must come back unchanged
        C = np.array([
            [0, 8, 7, 0, 0, 0],
            [8, 0, 9, 0, 0, 0],
            [7, 9, 0, 1, 0, 0],
            [0, 0, 1, 0, 6, 8],
            [0, 0, 0, 6, 0, 7],
            [0, 0, 0, 8, 7, 0],
        ])
        m = matrix_from(C)
        assert barycenter_order(m) == m.order

    def test_zero_matrix_preserved(self):
        m = matrix_from(np.zeros((5, 5), dtype=int), order=[4, 1, 3, 0, 2])
        assert barycenter_order(m) == (4, 1, 3, 0, 2)

    def test_planted_blocks_mild_shuffle(self):
        rng = np.random.default_rng(5)
        labels = [0] * 6 + [1] * 6
        C = planted_counts(rng, labels, within=(30, 60), cross=(0, 2))
        # mild shuffle: swap two pairs across the block border
        perm = list(range(12))
        perm[5], perm[6] = perm[6], perm[5]
        perm[3], perm[8] = perm[8], perm[3]
        perm = np.array(perm)
        m = matrix_from(C[np.ix_(perm, perm)], order=[int(x) for x in perm])
        order = barycenter_order(m)
        assert contiguous(order, labels)

    def test_deterministic(self):
        rng = np.random.default_rng(8)
        C = rng.integers(0, 9, size=(10, 10))
        m = matrix_from(C)
        assert barycenter_order(m) == barycenter_order(m)


class TestPartition:
    def test_single_block(self):
        m = matrix_from(np.ones((4, 4), dtype=int))
        part = partition_blocks(m, 1)
        assert part.boundaries == ()
        assert part.ranges() == [(0, 4)]

    def test_two_planted_blocks(self):
        # mass only within {0,1} and {2,3}
        C = np.array([
            [0, 5, 0, 0],
            [5, 0, 0, 0],
            [0, 0, 0, 7],
            [0, 0, 7, 0],
        ])
        part = partition_blocks(matrix_from(C), 2)
        assert part.boundaries == (2,)

    def test_b_equals_n(self):
        rng = np.random.default_rng(2)
        C = rng.integers(0, 5, size=(5, 5))
        part = partition_blocks(matrix_from(C), 5)
        assert part.boundaries == (1, 2, 3, 4)
        assert part.score == 0.0

    def test_b_out_of_range(self):
        m = matrix_from(np.zeros((3, 3), dtype=int))
        with pytest.raises(ValueError):
            partition_blocks(m, 4)
        with pytest.raises(ValueError):
            partition_blocks(m, 0)

    def test_exhaustive_equivalence_small(self):
        rng = np.random.default_rng(77)
        for _ in range(40):
            n = int(rng.integers(2, 10))
            b = int(rng.integers(1, min(n, 4) + 1))
            C = rng.integers(0, 10, size=(n, n))
            part = partition_counts(C, b)
            bounds, score = oracles.best_partition(C.tolist(), b)
            assert part.boundaries == bounds, (n, b, C)
            assert part.score == score

    def test_tie_rule_prefers_lexicographically_smallest(self):
        # all-zero mass: every placement scores 0; lex-smallest wins
        C = np.diag([3, 3, 3, 3, 3])
        part = partition_blocks(matrix_from(C), 3)
        assert part.boundaries == (1, 2)
        assert part.score == 0.0


class TestBlockOutliers:
    def test_no_cross_mass(self):
        C = np.array([[0, 5, 0, 0], [5, 0, 0, 0], [0, 0, 0, 7], [0, 0, 7, 0]])
        m = matrix_from(C)
        part = partition_blocks(m, 2)
        assert block_outliers(m, part) == []

    def test_single_cross_cell(self):
        C = np.array([[0, 5, 0, 7], [5, 0, 0, 0], [0, 0, 0, 6], [0, 0, 6, 0]])
        m = matrix_from(C)
        part = BlockPartition(boundaries=(2,), score=0.0, n=4)
        assert block_outliers(m, part) == [(0, 3, 7)]

    def test_matches_full_scan_oracle(self):
        rng = np.random.default_rng(9)
        C = rng.integers(0, 4, size=(8, 8))
        order = [int(x) for x in rng.permutation(8)]
        m = matrix_from(C, order=order)
        part = partition_blocks(m, 3)
        got = block_outliers(m, part)
        want = oracles.cross_block_cells(C.tolist(), order, part.boundaries)
        assert got == want


class TestHierarchyBuild:
    def test_two_level_planted_structure(self):
        rng = np.random.default_rng(21)
        # 16 classes: 2 super-blocks of 2 sub-blocks each (4 classes per sub).
        # Within-super cross-sub mass must stay a sizable fraction of
        # within-sub mass, otherwise the density-sum objective prefers
        # slicing off a single dense sub-block at the top level.
        sub = [i // 4 for i in range(16)]
        sup = [i // 8 for i in range(16)]
        n = 16
        C = np.zeros((n, n), dtype=np.int64)
        for i in range(n):
            for j in range(n):
                if i == j:
                    C[i, j] = 60
                elif sub[i] == sub[j]:
                    C[i, j] = rng.integers(45, 55)
                elif sup[i] == sup[j]:
                    C[i, j] = rng.integers(28, 36)
                else:
                    C[i, j] = rng.integers(0, 3)
        perm = rng.permutation(n)
        m = matrix_from(C[np.ix_(perm, perm)], order=[int(x) for x in perm])
        h = build_hierarchy_recursive(m, algorithm="spectral", blocks=2,
                                      max_depth=2, min_block_size=2)
        top = h.root.children
        assert len(top) == 2
        assert {frozenset(sup[c] for c in child.class_ids) for child in top} == \
               {frozenset({0}), frozenset({1})}
        leaf_partitions = set()
        for child in top:
            assert len(child.children) == 2
            for grand in child.children:
                leaf_partitions.add(frozenset(grand.class_ids))
        want = {frozenset(range(k * 4, k * 4 + 4)) for k in range(4)}
        assert leaf_partitions == want

    def test_single_class(self):
        m = matrix_from(np.array([[3]]))
        h = build_hierarchy_recursive(m)
        assert h.n_classes == 1
        assert h.root.is_leaf

    def test_max_depth_one_gives_flat_blocks(self):
        rng = np.random.default_rng(4)
        C = rng.integers(0, 10, size=(9, 9))
        m = matrix_from(C)
        h = build_hierarchy_recursive(m, blocks=3, max_depth=1)
        assert len(h.root.children) == 3
        for child in h.root.children:
            assert all(g.is_leaf for g in child.children) or child.is_leaf

    def test_leaf_order_defines_new_ordering(self):
        rng = np.random.default_rng(6)
        C = rng.integers(0, 8, size=(7, 7))
        m = matrix_from(C)
        h = build_hierarchy_recursive(m, blocks=2, max_depth=2)
        assert sorted(h.leaf_order) == list(range(7))

    def test_deterministic(self):
        rng = np.random.default_rng(10)
        C = rng.integers(0, 12, size=(14, 14))
        m = matrix_from(C)
        a = build_hierarchy_recursive(m, blocks=3, max_depth=3)
        b = build_hierarchy_recursive(m, blocks=3, max_depth=3)
        assert a.leaf_order == b.leaf_order

    def test_cell_multiset_invariant_under_reordering(self):
        rng = np.random.default_rng(12)
        C = rng.integers(0, 6, size=(8, 8))
        m = matrix_from(C)
        order = spectral_order(m)
        pos = {c: i for i, c in enumerate(m.order)}
        idx = [pos[c] for c in order]
        reordered = np.asarray(m.counts)[np.ix_(idx, idx)]
        assert sorted(reordered.ravel().tolist()) == sorted(
            np.asarray(m.counts).ravel().tolist())
