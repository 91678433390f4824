"""Confusion matrices, group-level performance and sample filters.

A sample counts as correct for a class group when both its true and its
predicted class fall inside the group; precision, recall and F1 are then
the ordinary binary metrics of that notion with the zero-denominator
convention fixed at 0 (keeps NaN out of downstream color scales).

All functions are pure over immutable evaluation sets.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .datamodel import ClassHierarchy, EvaluationSet


@dataclass(frozen=True)
class ConfusionMatrix:
    """Class-by-class tallies under a display order.

    ``counts[i][j]`` = number of samples whose true class is ``order[i]``
    and predicted class is ``order[j]``.
    """

    order: tuple[int, ...]
    counts: np.ndarray
    set_id: str = ""

    def __post_init__(self):
        self.counts.setflags(write=False)

    @property
    def n(self) -> int:
        return len(self.order)

    @property
    def n_samples(self) -> int:
        return int(self.counts.sum())

    def position_of(self) -> dict[int, int]:
        return {cid: i for i, cid in enumerate(self.order)}


@dataclass(frozen=True)
class ClassGroup:
    """A set of classes treated as one classification target."""

    group_id: int
    class_ids: frozenset[int]

    def __post_init__(self):
        if not self.class_ids:
            raise ValueError("a class group must be non-empty")


@dataclass(frozen=True)
class GroupMetrics:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int


@dataclass(frozen=True)
class FilterSpec:
    """Conjunction of sample filters; unset clauses are skipped."""

    min_cell_value: int | None = None
    top_k: int | None = None
    predicted_prob_range: tuple[float, float] | None = None
    actual_prob_range: tuple[float, float] | None = None
    exclude_diagonal: bool = True

    def validate(self) -> None:
        if self.top_k is not None and self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.min_cell_value is not None and self.min_cell_value < 0:
            raise ValueError("min_cell_value must be >= 0")
        for name, rng in (("predicted_prob_range", self.predicted_prob_range),
                          ("actual_prob_range", self.actual_prob_range)):
            if rng is None:
                continue
            lo, hi = rng
            if not (0.0 <= lo <= hi <= 1.0):
                raise ValueError(f"{name} must satisfy 0 <= lo <= hi <= 1, got {rng}")

    def describe(self) -> str:
        parts = []
        if self.exclude_diagonal:
            parts.append("off-diagonal")
        if self.min_cell_value is not None:
            parts.append(f"cell>={self.min_cell_value}")
        if self.top_k is not None:
            parts.append(f"top-{self.top_k} errors")
        if self.predicted_prob_range is not None:
            lo, hi = self.predicted_prob_range
            parts.append(f"pred-prob in [{lo},{hi}]")
        if self.actual_prob_range is not None:
            lo, hi = self.actual_prob_range
            parts.append(f"true-prob in [{lo},{hi}]")
        return ", ".join(parts) if parts else "all samples"


@dataclass(frozen=True)
class SampleSelection:
    """An ordered subset of one evaluation set's samples."""

    set_id: str
    sample_ids: tuple[str, ...]
    provenance: str
    unknown_count: int = 0

    def __len__(self) -> int:
        return len(self.sample_ids)


@dataclass(frozen=True)
class GroupSelectionBands:
    """Disjoint TP/FP/FN sample bands for one group."""

    group: ClassGroup
    tp: SampleSelection
    fp: SampleSelection
    fn: SampleSelection


def _group_lut(eval_set: EvaluationSet, g: ClassGroup) -> np.ndarray:
    cids = np.fromiter(g.class_ids, dtype=np.int64)
    if cids.min() < 0 or cids.max() >= eval_set.n_classes:
        raise ValueError(
            f"group {g.group_id} references classes outside 0..{eval_set.n_classes - 1}")
    lut = np.zeros(eval_set.n_classes, dtype=bool)
    lut[cids] = True
    return lut


def build_confusion(eval_set: EvaluationSet, order: Sequence[int]) -> ConfusionMatrix:
    """Tally (true, predicted) pairs under a display order."""
    order = tuple(int(c) for c in order)
    if sorted(order) != list(range(eval_set.n_classes)):
        raise ValueError("order is not a permutation of the class ids")
    idx = np.asarray(order, dtype=np.int64)
    counts = eval_set.pair_counts[np.ix_(idx, idx)].copy()
    return ConfusionMatrix(order=order, counts=counts, set_id=eval_set.set_id)


def group_counts(eval_set: EvaluationSet, g: ClassGroup) -> tuple[int, int, int]:
    """(tp, fp, fn) sample counts for a group."""
    lut = _group_lut(eval_set, g)
    true_in = lut[eval_set.true_ids]
    pred_in = lut[eval_set.top1_ids]
    tp = int(np.count_nonzero(true_in & pred_in))
    fp = int(np.count_nonzero(~true_in & pred_in))
    fn = int(np.count_nonzero(true_in & ~pred_in))
    return tp, fp, fn


def _metrics_from_counts(tp: int, fp: int, fn: int) -> GroupMetrics:
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    if precision + recall > 0:
        # the harmonic mean of equal values is that value; computing the
        # quotient would land 1 ulp off and break the min<=f1<=max bound
        f1 = (precision if precision == recall
              else 2.0 * precision * recall / (precision + recall))
    else:
        f1 = 0.0
    return GroupMetrics(precision=precision, recall=recall, f1=f1,
                        tp=tp, fp=fp, fn=fn)


def group_metrics(eval_set: EvaluationSet, g: ClassGroup) -> GroupMetrics:
    return _metrics_from_counts(*group_counts(eval_set, g))


def per_class_accuracy(eval_set: EvaluationSet) -> list[float | None]:
    """Fraction correct per class; None marks classes with no samples."""
    n = eval_set.n_classes
    totals = np.bincount(eval_set.true_ids, minlength=n)
    correct = np.bincount(eval_set.true_ids[eval_set.true_ids == eval_set.top1_ids],
                          minlength=n)
    return [correct[c] / totals[c] if totals[c] > 0 else None for c in range(n)]


def topk_error(eval_set: EvaluationSet, k: int) -> float:
    """Fraction of samples whose true class is absent from the first k guesses."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return float(np.count_nonzero(eval_set.true_rank >= k)) / eval_set.n_samples


def filter_samples(eval_set: EvaluationSet, spec: FilterSpec) -> SampleSelection:
    """Apply the conjunction of all enabled filter clauses.

    ``min_cell_value`` is evaluated against the unfiltered (true, predicted)
    tallies of the same set; samples whose truncated ranking hides the true
    class's probability are excluded from an ``actual_prob_range`` clause
    and reported via ``unknown_count``.
    """
    spec.validate()
    mask = np.ones(eval_set.n_samples, dtype=bool)
    if spec.exclude_diagonal:
        mask &= eval_set.true_ids != eval_set.top1_ids
    if spec.top_k is not None:
        mask &= eval_set.true_rank >= spec.top_k
    if spec.predicted_prob_range is not None:
        lo, hi = spec.predicted_prob_range
        mask &= (eval_set.top1_probs >= lo) & (eval_set.top1_probs <= hi)
    if spec.min_cell_value is not None:
        cell = eval_set.pair_counts[eval_set.true_ids, eval_set.top1_ids]
        mask &= cell >= spec.min_cell_value
    unknown = 0
    if spec.actual_prob_range is not None:
        lo, hi = spec.actual_prob_range
        known = ~np.isnan(eval_set.true_probs)
        unknown = int(np.count_nonzero(mask & ~known))
        with np.errstate(invalid="ignore"):
            mask &= known & (eval_set.true_probs >= lo) & (eval_set.true_probs <= hi)
    ids = tuple(eval_set.sample_ids[i] for i in np.flatnonzero(mask))
    return SampleSelection(set_id=eval_set.set_id, sample_ids=ids,
                           provenance=spec.describe(), unknown_count=unknown)


def selection_bands(eval_set: EvaluationSet, g: ClassGroup) -> GroupSelectionBands:
    """TP/FP/FN sample bands for a group, each in evaluation-set order."""
    lut = _group_lut(eval_set, g)
    true_in = lut[eval_set.true_ids]
    pred_in = lut[eval_set.top1_ids]

    def pick(mask: np.ndarray, tag: str) -> SampleSelection:
        ids = tuple(eval_set.sample_ids[i] for i in np.flatnonzero(mask))
        return SampleSelection(set_id=eval_set.set_id, sample_ids=ids,
                               provenance=f"group {g.group_id} {tag}")

    return GroupSelectionBands(
        group=g,
        tp=pick(true_in & pred_in, "true positives"),
        fp=pick(~true_in & pred_in, "false positives"),
        fn=pick(true_in & ~pred_in, "false negatives"),
    )


def node_group(node) -> ClassGroup:
    """The ClassGroup a hierarchy node stands for."""
    return ClassGroup(group_id=node.group_id, class_ids=node.class_ids)


def annotate_hierarchy(eval_set: EvaluationSet, hierarchy: ClassHierarchy,
                       metric: str = "f1") -> dict[int, float]:
    """Metric value for every hierarchy node's class group.

    Works off the cached (true, predicted) tallies so large trees stay cheap.
    """
    if metric not in ("precision", "recall", "f1"):
        raise ValueError(f"metric must be precision|recall|f1, got {metric!r}")
    counts = eval_set.pair_counts
    row_sums = counts.sum(axis=1)
    col_sums = counts.sum(axis=0)
    out: dict[int, float] = {}
    for node in hierarchy.root.walk():
        cids = np.fromiter(node.class_ids, dtype=np.int64)
        tp = int(counts[np.ix_(cids, cids)].sum())
        fp = int(col_sums[cids].sum()) - tp
        fn = int(row_sums[cids].sum()) - tp
        out[node.group_id] = getattr(_metrics_from_counts(tp, fp, fn), metric)
    return out
