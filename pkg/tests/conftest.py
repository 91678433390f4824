import json
import struct
from pathlib import Path

import numpy as np
import pytest

from classblocks import (EvaluationSet, NeuronShape, ResponseTensor, SampleRecord,
                         hierarchy_from_json, register_dataset, save_predictions,
                         save_responses)

# 1x1 transparent PNG, enough for thumbnail round-trips
TINY_PNG = bytes.fromhex(
    "89504e470d0a1a0a0000000d49484452000000010000000108060000001f15c489"
    "0000000a49444154789c6300010000050001"
    "0d0a2db40000000049454e44ae426082")


def make_record(sample_id, true_class, predicted, n_classes, p_top=0.9):
    """A two-guess ranking with the given top-1 prediction."""
    if n_classes < 2:
        return SampleRecord(sample_id=sample_id, true_class=true_class,
                            predictions=((predicted, p_top),))
    second = (predicted + 1) % n_classes
    return SampleRecord(sample_id=sample_id, true_class=true_class,
                        predictions=((predicted, p_top), (second, round(1 - p_top, 6))))


@pytest.fixture
def toy_eval():
    """4 classes, 6 samples: (0->0),(0->1),(0->2),(1->1),(2->0),(3->3)."""
    pairs = [(0, 0), (0, 1), (0, 2), (1, 1), (2, 0), (3, 3)]
    records = [make_record(f"s{i + 1}", t, p, 4) for i, (t, p) in enumerate(pairs)]
    return EvaluationSet.build("val", records, n_classes=4)


def random_eval(n_classes, n_samples, seed, set_id="val", top_m=None,
                correct_rate=0.6):
    """Random evaluation set with full (or truncated) probability rankings."""
    rng = np.random.default_rng(seed)
    true = rng.integers(0, n_classes, size=n_samples)
    probs = rng.dirichlet(np.ones(n_classes), size=n_samples)
    force_correct = rng.random(n_samples) < correct_rate
    records = []
    for i in range(n_samples):
        p = probs[i].copy()
        if force_correct[i]:
            top = int(np.argmax(p))
            p[true[i]], p[top] = p[top], p[true[i]]
        ranked = np.argsort(-p, kind="stable")
        if top_m is not None:
            ranked = ranked[:top_m]
        preds = tuple((int(c), float(p[c])) for c in ranked)
        records.append(SampleRecord(sample_id=f"{set_id}-{i}", true_class=int(true[i]),
                                    predictions=preds))
    return EvaluationSet.build(set_id, records, n_classes=n_classes)


def random_tensor(layer_id, sample_ids, neurons, seed, loc=1.0, scale=0.5):
    rng = np.random.default_rng(seed)
    total = sum(h * w for h, w in neurons)
    flat = rng.normal(loc, scale, size=(len(sample_ids), total)).astype(np.float32)
    return ResponseTensor.build(layer_id, sample_ids, neurons, flat)


@pytest.fixture
def two_group_hierarchy():
    return hierarchy_from_json({
        "label": "root",
        "children": [
            {"label": "animals", "children": [{"class_id": 0}, {"class_id": 1}]},
            {"label": "things", "children": [{"class_id": 2}, {"class_id": 3}]},
        ]})


@pytest.fixture
def toy_bundle(toy_eval, two_group_hierarchy):
    ids = list(toy_eval.sample_ids)
    tensor = random_tensor("conv1", ids, [(2, 2), (2, 2), (1, 4)], seed=5)
    return register_dataset(two_group_hierarchy, [toy_eval], [tensor],
                            dataset_id="toy")


def write_dataset_dir(root: Path, eval_sets, hierarchy_obj, tensors=(),
                      dataset_id="demo", thumbnails_for=()):
    """Write a complete on-disk dataset (manifest + all referenced files)."""
    root.mkdir(parents=True, exist_ok=True)
    (root / "hierarchy.json").write_text(json.dumps(hierarchy_obj), encoding="utf-8")
    manifest = {"dataset_id": dataset_id, "hierarchy": "hierarchy.json",
                "predictions": {}}
    for es in eval_sets:
        fname = f"{es.set_id}.jsonl"
        save_predictions(es, root / fname)
        manifest["predictions"][es.set_id] = fname
    if tensors:
        manifest["responses"] = {}
        for t in tensors:
            save_responses(t, root / f"{t.layer_id}.blkr", root / f"{t.layer_id}.json")
            manifest["responses"][t.layer_id] = {
                "data": f"{t.layer_id}.blkr", "sidecar": f"{t.layer_id}.json"}
    if thumbnails_for:
        thumb_dir = root / "thumbs"
        thumb_dir.mkdir(exist_ok=True)
        for sid in thumbnails_for:
            (thumb_dir / f"{sid}.png").write_bytes(TINY_PNG)
        manifest["thumbnails"] = "thumbs"
    (root / "dataset.json").write_text(json.dumps(manifest, indent=2),
                                       encoding="utf-8")
    return root


@pytest.fixture
def dataset_dir(tmp_path, toy_eval, two_group_hierarchy):
    """Toy dataset on disk: 4 classes, two eval sets, one layer, thumbnails."""
    ids = list(toy_eval.sample_ids)
    # variant set: same universe, class 0 samples all mispredicted into class 2
    variant_records = []
    for rec in toy_eval.samples:
        pred = 2 if rec.true_class == 0 else rec.predictions[0][0]
        variant_records.append(make_record(rec.sample_id, rec.true_class, pred, 4))
    variant = EvaluationSet.build("gray", variant_records, n_classes=4)
    tensor = random_tensor("conv1", ids, [(2, 2), (2, 2)], seed=11)
    hierarchy_obj = {
        "label": "root",
        "children": [
            {"label": "animals", "children": [{"class_id": 0}, {"class_id": 1}]},
            {"label": "things", "children": [{"class_id": 2}, {"class_id": 3}]},
        ]}
    return write_dataset_dir(tmp_path / "demo", [toy_eval, variant], hierarchy_obj,
                             [tensor], thumbnails_for=ids[:2])
