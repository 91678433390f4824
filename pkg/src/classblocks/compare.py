"""Comparing evaluation sets over a shared sample universe.

Covers transformation-sensitivity deltas (metric per group on a base and a
variant set, delta = variant - base in percentage points of the raw
metric), epoch-over-epoch series, and boolean sample-set algebra over
per-set correctness predicates.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .datamodel import ClassHierarchy, EvaluationSet
from .metrics import (ConfusionMatrix, GroupMetrics, SampleSelection,
                      build_confusion, group_metrics, node_group)

_METRICS = ("precision", "recall", "f1")


@dataclass(frozen=True)
class ComparisonSpec:
    base_set_id: str
    variant_set_id: str
    metric: str
    hierarchy: ClassHierarchy

    def validate(self) -> None:
        if self.metric not in _METRICS:
            raise ValueError(f"metric must be one of {_METRICS}")
        if self.base_set_id == self.variant_set_id:
            # legal (delta 0 everywhere) but usually a caller mistake
            pass


@dataclass(frozen=True)
class GroupDelta:
    group_id: int
    label: str
    base_value: float
    variant_value: float

    @property
    def delta(self) -> float:
        return self.variant_value - self.base_value


@dataclass(frozen=True)
class GroupDeltaReport:
    deltas: tuple[GroupDelta, ...]  # ascending delta: largest drops first
    dropped_base: int  # samples of the base set outside the shared universe
    dropped_variant: int


def _shared_universe(base: EvaluationSet, variant: EvaluationSet):
    base_ids = set(base.sample_ids)
    var_ids = set(variant.sample_ids)
    shared = base_ids & var_ids
    if not shared:
        raise ValueError(
            f"sets {base.set_id!r} and {variant.set_id!r} share no samples")
    dropped_base = len(base_ids) - len(shared)
    dropped_variant = len(var_ids) - len(shared)
    if dropped_base or dropped_variant:
        warnings.warn(
            f"sets {base.set_id!r}/{variant.set_id!r} differ; intersecting "
            f"universes drops {dropped_base}+{dropped_variant} samples")
        base = base.restrict(shared, suffix="shared")
        variant = variant.restrict(shared, suffix="shared")
    return base, variant, dropped_base, dropped_variant


def group_deltas(spec: ComparisonSpec,
                 sets: Mapping[str, EvaluationSet]) -> GroupDeltaReport:
    """Metric delta for every hierarchy group between two result sets."""
    spec.validate()
    base = sets[spec.base_set_id]
    variant = sets[spec.variant_set_id]
    base, variant, dropped_base, dropped_variant = _shared_universe(base, variant)
    deltas = []
    for node in spec.hierarchy.root.walk():
        g = node_group(node)
        b = getattr(group_metrics(base, g), spec.metric)
        v = getattr(group_metrics(variant, g), spec.metric)
        deltas.append(GroupDelta(group_id=node.group_id, label=node.label,
                                 base_value=b, variant_value=v))
    deltas.sort(key=lambda d: (d.delta, d.group_id))
    return GroupDeltaReport(deltas=tuple(deltas), dropped_base=dropped_base,
                            dropped_variant=dropped_variant)


# ---------------------------------------------------------------------------
# sample-set expressions


@dataclass(frozen=True)
class Predicate:
    kind: str  # top1-correct | top5-correct | misclassified
    set_id: str


@dataclass(frozen=True)
class Not:
    operand: "SetExpression"


@dataclass(frozen=True)
class And:
    left: "SetExpression"
    right: "SetExpression"


@dataclass(frozen=True)
class Or:
    left: "SetExpression"
    right: "SetExpression"


SetExpression = Predicate | Not | And | Or

_PRED_KINDS = ("top1-correct", "top5-correct", "misclassified")
_TOKEN = re.compile(r"\s*(\(|\)|AND\b|OR\b|NOT\b|[A-Za-z0-9_:.\-]+)")


def parse_set_expression(text: str) -> SetExpression:
    """Parse e.g. ``top1-correct(A) AND NOT top5-correct(B)``."""
    tokens: list[str] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            if text[pos:].strip():
                raise ValueError(f"unparseable expression near {text[pos:]!r}")
            break
        tokens.append(m.group(1))
        pos = m.end()
    cursor = 0

    def peek():
        return tokens[cursor] if cursor < len(tokens) else None

    def take(expected=None):
        nonlocal cursor
        tok = peek()
        if tok is None or (expected is not None and tok != expected):
            raise ValueError(f"expected {expected or 'token'}, got {tok!r}")
        cursor += 1
        return tok

    def parse_or():
        node = parse_and()
        while peek() == "OR":
            take("OR")
            node = Or(node, parse_and())
        return node

    def parse_and():
        node = parse_unary()
        while peek() == "AND":
            take("AND")
            node = And(node, parse_unary())
        return node

    def parse_unary():
        tok = peek()
        if tok == "NOT":
            take("NOT")
            return Not(parse_unary())
        if tok == "(":
            take("(")
            node = parse_or()
            take(")")
            return node
        name = take()
        if name not in _PRED_KINDS:
            raise ValueError(
                f"unknown predicate {name!r}; expected one of {_PRED_KINDS}")
        take("(")
        set_id = take()
        take(")")
        return Predicate(kind=name, set_id=set_id)

    node = parse_or()
    if cursor != len(tokens):
        raise ValueError(f"trailing tokens in expression: {tokens[cursor:]}")
    return node


def _referenced_sets(expr: SetExpression) -> list[str]:
    if isinstance(expr, Predicate):
        return [expr.set_id]
    if isinstance(expr, Not):
        return _referenced_sets(expr.operand)
    return _referenced_sets(expr.left) + _referenced_sets(expr.right)


def format_set_expression(expr: SetExpression) -> str:
    if isinstance(expr, Predicate):
        return f"{expr.kind}({expr.set_id})"
    if isinstance(expr, Not):
        return f"NOT {format_set_expression(expr.operand)}"
    op = "AND" if isinstance(expr, And) else "OR"
    return (f"({format_set_expression(expr.left)} {op} "
            f"{format_set_expression(expr.right)})")


def evaluate_set_expression(expr: SetExpression | str,
                            sets: Mapping[str, EvaluationSet]) -> SampleSelection:
    """Evaluate a boolean sample expression.

    The universe is the intersection of the referenced sets' sample ids
    (NOT complements within it); the result keeps the first referenced
    set's sample order.
    """
    if isinstance(expr, str):
        expr = parse_set_expression(expr)
    refs = _referenced_sets(expr)
    for sid in refs:
        if sid not in sets:
            raise ValueError(f"unknown set_id {sid!r} in expression")
    universe = set(sets[refs[0]].sample_ids)
    for sid in refs[1:]:
        universe &= set(sets[sid].sample_ids)

    def predicate_ids(p: Predicate) -> set[str]:
        es = sets[p.set_id]
        if p.kind == "top1-correct":
            mask = es.true_rank < 1
        elif p.kind == "top5-correct":
            mask = es.true_rank < 5
        else:  # misclassified
            mask = es.true_rank >= 1
        return {es.sample_ids[i] for i in np.flatnonzero(mask)}

    def evaluate(e: SetExpression) -> set[str]:
        if isinstance(e, Predicate):
            return predicate_ids(e) & universe
        if isinstance(e, Not):
            return universe - evaluate(e.operand)
        if isinstance(e, And):
            return evaluate(e.left) & evaluate(e.right)
        return evaluate(e.left) | evaluate(e.right)

    hits = evaluate(expr)
    anchor = sets[refs[0]]
    ordered = tuple(sid for sid in anchor.sample_ids if sid in hits)
    return SampleSelection(set_id=anchor.set_id, sample_ids=ordered,
                           provenance=format_set_expression(expr))


# ---------------------------------------------------------------------------
# epoch series


@dataclass(frozen=True)
class EpochSeries:
    set_ids: tuple[str, ...]
    metrics: tuple[GroupMetrics, ...]  # one per set, in order
    matrices: tuple[ConfusionMatrix, ...]  # shared class order


def epoch_series(sets: Sequence[EvaluationSet], group,
                 order: Sequence[int]) -> EpochSeries:
    """Per-set group metrics plus confusion matrices under one class order."""
    if len(sets) < 2:
        raise ValueError("an epoch series needs at least 2 evaluation sets")
    metrics = tuple(group_metrics(es, group) for es in sets)
    matrices = tuple(build_confusion(es, order) for es in sets)
    return EpochSeries(set_ids=tuple(es.set_id for es in sets),
                       metrics=metrics, matrices=matrices)
