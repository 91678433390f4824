"""Payload assembly shared by the CLI and the HTTP service.

Every view is a pure function of (bundle, parameters) returning plain
dicts; ``canonical_json_bytes`` serializes them with a fixed key order and
compact separators so the two front doors emit byte-identical artifacts.
Infinite relevance values serialize as the string "inf".
"""

from __future__ import annotations

import json
import math
from typing import Sequence

import numpy as np

from .compare import ComparisonSpec, group_deltas
from .datamodel import DatasetBundle, hierarchy_to_json
from .metrics import (FilterSpec, SampleSelection, annotate_hierarchy,
                      build_confusion, filter_samples, group_metrics, node_group,
                      per_class_accuracy, selection_bands)
from .responses import (ResponseRenderSpec, build_response_map, correlation_view,
                        rank_neurons)
from .seriation import partition_blocks


def canonical_json_bytes(obj) -> bytes:
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False,
                      allow_nan=False).encode("utf-8")


def encode_value(x: float) -> float | str:
    """JSON-able metric value; +inf serializes as the string "inf"."""
    if math.isinf(x):
        return "inf"
    return float(x)


# ---------------------------------------------------------------------------
# hierarchy


def hierarchy_payload(bundle: DatasetBundle, set_id: str | None = None,
                      metric: str | None = None) -> dict:
    values: dict[int, float] = {}
    if metric is not None:
        if set_id is None:
            set_id = bundle.only_set_id()
        values = annotate_hierarchy(bundle.eval_set(set_id), bundle.hierarchy, metric)

    def encode(node) -> dict:
        out = {"group_id": node.group_id, "label": node.label,
               "size": len(node.class_ids)}
        if metric is not None:
            out["value"] = values[node.group_id]
        if node.is_leaf:
            out["class_id"] = node.class_id
        else:
            out["children"] = [encode(c) for c in node.children]
        return out

    return {"dataset_id": bundle.dataset_id, "set_id": set_id, "metric": metric,
            "root": encode(bundle.hierarchy.root)}


# ---------------------------------------------------------------------------
# confusion matrix


def _filters_echo(spec: FilterSpec) -> dict:
    return {
        "excludeDiagonal": spec.exclude_diagonal,
        "minCell": spec.min_cell_value,
        "topk": spec.top_k,
        "predProb": list(spec.predicted_prob_range) if spec.predicted_prob_range else None,
        "actProb": list(spec.actual_prob_range) if spec.actual_prob_range else None,
    }


def confusion_payload(bundle: DatasetBundle, set_id: str, order: Sequence[int],
                      spec: FilterSpec | None = None,
                      blocks: int | None = None) -> dict:
    """Sparse confusion cells among the filtered samples, plus an optional
    block-partition overlay computed on the unfiltered matrix."""
    eval_set = bundle.eval_set(set_id)
    spec = spec or FilterSpec()
    selection = filter_samples(eval_set, spec)
    order = tuple(int(c) for c in order)

    if selection.sample_ids:
        shown = eval_set.restrict(selection.sample_ids, suffix="filtered")
        counts = build_confusion(shown, order).counts
    else:
        counts = np.zeros((eval_set.n_classes, eval_set.n_classes), dtype=np.int64)

    rows, cols = np.nonzero(counts)
    cells = [[int(r), int(c), int(counts[r, c])] for r, c in zip(rows, cols)]

    partition = None
    if blocks is not None:
        full = build_confusion(eval_set, order)
        part = partition_blocks(full, blocks)
        partition = {"boundaries": list(part.boundaries), "score": part.score}

    accuracy = per_class_accuracy(eval_set)
    return {
        "dataset_id": bundle.dataset_id,
        "set_id": set_id,
        "order": list(order),
        "n_selected": len(selection.sample_ids),
        "unknown_count": selection.unknown_count,
        "filters": _filters_echo(spec),
        "cells": cells,
        "partition": partition,
        "class_accuracy": [accuracy[c] for c in order],
    }


# ---------------------------------------------------------------------------
# response map / relevance / correlation


def responsemap_payload(bundle: DatasetBundle, layer_id: str, set_id: str,
                        threshold: float | None = None,
                        downsample: tuple[int, int] | None = None,
                        order_by_group: int | None = None) -> dict:
    """Per-class response profiles; cells >= threshold are flagged saturated
    and columns can be ordered by relevance to a hierarchy group."""
    tensor = bundle.tensor(layer_id)
    eval_set = bundle.eval_set(set_id)
    render = ResponseRenderSpec(
        threshold=np.inf if threshold is None else threshold,
        downsample=downsample)
    rmap = build_response_map(tensor, eval_set, bundle.hierarchy.leaf_order, render)

    relevance: dict[int, float] = {}
    column_order = list(range(tensor.n_neurons))
    if order_by_group is not None:
        node = bundle.hierarchy.node(order_by_group)
        ranked = rank_neurons(tensor, eval_set, node_group(node))
        relevance = {r.neuron_id: r.value for r in ranked}
        column_order = [r.neuron_id for r in ranked]

    neurons = []
    for n_idx in column_order:
        prof = rmap.profiles[n_idx]
        entry = {
            "neuron_id": prof.neuron_id,
            "shape": list(prof.shape),
            "relevance": encode_value(relevance[n_idx]) if relevance else None,
            "profile": [[float(v) for v in row] for row in prof.values],
        }
        if threshold is not None:
            sat_rows, sat_cols = np.nonzero(prof.values >= threshold)
            entry["saturated"] = [[int(r), int(c)]
                                  for r, c in zip(sat_rows, sat_cols)]
        neurons.append(entry)

    return {
        "dataset_id": bundle.dataset_id,
        "set_id": set_id,
        "layer_id": layer_id,
        "threshold": threshold,
        "class_order": list(rmap.class_order),
        "defined": [bool(d) for d in rmap.defined],
        "neurons": neurons,
    }


def relevance_payload(bundle: DatasetBundle, layer_id: str, set_id: str,
                      group_id: int) -> dict:
    tensor = bundle.tensor(layer_id)
    eval_set = bundle.eval_set(set_id)
    node = bundle.hierarchy.node(group_id)
    ranked = rank_neurons(tensor, eval_set, node_group(node))
    return {
        "dataset_id": bundle.dataset_id,
        "set_id": set_id,
        "layer_id": layer_id,
        "group_id": group_id,
        "neurons": [{"neuron_id": r.neuron_id, "value": encode_value(r.value)}
                    for r in ranked],
    }


def correlation_payload(bundle: DatasetBundle, class_id: int, layer_id: str,
                        set_id: str) -> dict:
    tensor = bundle.tensor(layer_id)
    eval_set = bundle.eval_set(set_id)
    view = correlation_view(tensor, eval_set, class_id)
    return {
        "dataset_id": bundle.dataset_id,
        "set_id": set_id,
        "layer_id": layer_id,
        "class_id": class_id,
        "sample_order": list(view.sample_order),
        "corr": [[float(v) for v in row] for row in view.corr],
        "responses": [[float(v) for v in row] for row in view.sample_response_map],
    }


# ---------------------------------------------------------------------------
# metrics / compare


def _metrics_entry(eval_set, node) -> dict:
    gm = group_metrics(eval_set, node_group(node))
    return {"group_id": node.group_id, "label": node.label,
            "precision": gm.precision, "recall": gm.recall, "f1": gm.f1,
            "tp": gm.tp, "fp": gm.fp, "fn": gm.fn}


def metrics_payload(bundle: DatasetBundle, set_id: str,
                    group_id: int | None = None) -> dict:
    eval_set = bundle.eval_set(set_id)
    if group_id is not None:
        nodes = [bundle.hierarchy.node(group_id)]
    else:
        nodes = sorted(bundle.hierarchy.root.walk(), key=lambda n: n.group_id)
    return {
        "dataset_id": bundle.dataset_id,
        "set_id": set_id,
        "groups": [_metrics_entry(eval_set, n) for n in nodes],
    }


def metrics_tsv(payload: dict) -> str:
    lines = ["group_id\tlabel\tprecision\trecall\tf1\ttp\tfp\tfn"]
    for g in payload["groups"]:
        lines.append("\t".join(str(g[k]) for k in
                               ("group_id", "label", "precision", "recall",
                                "f1", "tp", "fp", "fn")))
    return "\n".join(lines) + "\n"


def compare_payload(bundle: DatasetBundle, base: str, variant: str,
                    metric: str) -> dict:
    spec = ComparisonSpec(base_set_id=base, variant_set_id=variant,
                          metric=metric, hierarchy=bundle.hierarchy)
    report = group_deltas(spec, bundle.eval_sets)
    return {
        "dataset_id": bundle.dataset_id,
        "base": base,
        "variant": variant,
        "metric": metric,
        "dropped": [report.dropped_base, report.dropped_variant],
        "groups": [{"group_id": d.group_id, "label": d.label,
                    "base": d.base_value, "variant": d.variant_value,
                    "delta": d.delta}
                   for d in report.deltas],
    }


def compare_tsv(payload: dict) -> str:
    lines = ["group_id\tlabel\tbase\tvariant\tdelta"]
    for g in payload["groups"]:
        lines.append("\t".join(str(g[k]) for k in
                               ("group_id", "label", "base", "variant", "delta")))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# samples


def band_selection(bundle: DatasetBundle, set_id: str, group_id: int,
                   band: str) -> SampleSelection:
    eval_set = bundle.eval_set(set_id)
    node = bundle.hierarchy.node(group_id)
    bands = selection_bands(eval_set, node_group(node))
    if band not in ("tp", "fp", "fn"):
        raise ValueError(f"band must be tp|fp|fn, got {band!r}")
    return getattr(bands, band)


def samples_payload(bundle: DatasetBundle, set_id: str,
                    selection: SampleSelection,
                    group_by_class: bool = False) -> dict:
    eval_set = bundle.eval_set(set_id)
    labels = {c.class_id: c.label for c in bundle.classes}
    out = {
        "dataset_id": bundle.dataset_id,
        "set_id": set_id,
        "provenance": selection.provenance,
        "unknown_count": selection.unknown_count,
        "count": len(selection.sample_ids),
    }
    if group_by_class:
        groups: dict[int, dict] = {}
        for sid in selection.sample_ids:
            rec = eval_set.samples[eval_set.id_index[sid]]
            slot = groups.setdefault(rec.true_class, {
                "class_id": rec.true_class,
                "label": labels[rec.true_class],
                "count": 0,
                "representative": sid,
            })
            slot["count"] += 1
        out["groups"] = [groups[c] for c in sorted(groups)]
        return out

    entries = []
    for sid in selection.sample_ids:
        rec = eval_set.samples[eval_set.id_index[sid]]
        idx = eval_set.id_index[sid]
        rank = int(eval_set.true_rank[idx])
        true_prob = eval_set.true_probs[idx]
        entries.append({
            "sample_id": sid,
            "true": rec.true_class,
            "true_label": labels[rec.true_class],
            "predicted": rec.predicted,
            "predicted_label": labels[rec.predicted],
            "pred_prob": float(eval_set.top1_probs[idx]),
            "true_prob": None if math.isnan(true_prob) else float(true_prob),
            "top1_correct": rank == 0,
            "top5_correct": rank < 5,
        })
    out["samples"] = entries
    return out


# ---------------------------------------------------------------------------
# seriation / hierarchy-build results


def seriation_payload(bundle: DatasetBundle, set_id: str, algorithm: str,
                      order: Sequence[int],
                      boundaries: Sequence[int] | None = None,
                      score: float | None = None) -> dict:
    out = {
        "dataset_id": bundle.dataset_id,
        "set_id": set_id,
        "algorithm": algorithm,
        "order": [int(c) for c in order],
    }
    out["boundaries"] = [int(x) for x in boundaries] if boundaries is not None else None
    out["score"] = score
    return out


def hierarchy_build_payload(bundle: DatasetBundle, set_id: str, params: dict,
                            hierarchy) -> dict:
    return {
        "dataset_id": bundle.dataset_id,
        "set_id": set_id,
        "params": params,
        "order": list(hierarchy.leaf_order),
        "tree": hierarchy_to_json(hierarchy),
    }
