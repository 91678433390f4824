"""Domain types and file ingestion.

Three on-disk formats are defined here:

* hierarchy: UTF-8 JSON, one node object per tree node with
  ``{"label": str?, "class_id": int}`` for leaves and
  ``{"label": str?, "children": [node, ...]}`` for groups (exactly one of
  ``class_id``/``children`` per node).
* predictions: JSON Lines, one record per sample:
  ``{"sample_id": str, "true": int, "pred": [[class_id, prob], ...]}``
  with ``pred`` sorted by non-increasing probability. Rankings may be
  truncated (top-m) rather than full probability vectors.
* response tensor: little-endian binary — magic ``BLKR``, version ``u32=1``,
  ``n_samples u32``, ``n_neurons u32``, then ``n_neurons`` pairs
  ``(height u16, width u16)``, then float32 values ordered sample-major,
  then neuron, then row-major cells. A JSON sidecar supplies
  ``{"layer_id": str, "samples": [sample_id, ...]}``.

All loaded objects are immutable; writers emit canonical bytes so that
write -> read -> write round-trips are byte-identical.
"""

from __future__ import annotations

import json
import struct
import uuid
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConsistencyError, DataError, FormatError, TruncationError

_BLKR_MAGIC = b"BLKR"
_BLKR_VERSION = 1

# guard against pathological nesting in hierarchy files (a self-referencing
# producer would otherwise recurse forever)
_MAX_HIERARCHY_DEPTH = 10_000


def _canon_json(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


@dataclass(frozen=True)
class ClassInfo:
    """One leaf category of the classifier."""

    class_id: int
    label: str


@dataclass(frozen=True)
class HierarchyNode:
    """Node of the class hierarchy; leaves carry exactly one class id."""

    group_id: int
    label: str
    children: tuple["HierarchyNode", ...]
    class_ids: frozenset[int]

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @property
    def class_id(self) -> int:
        if not self.is_leaf:
            raise ValueError(f"group node {self.group_id} has no single class_id")
        return next(iter(self.class_ids))

    def walk(self):
        """Yield this node and all descendants in preorder."""
        yield self
        for child in self.children:
            yield from child.walk()


@dataclass(frozen=True)
class ClassHierarchy:
    """Rooted tree over class ids; left-to-right leaf order is the class order."""

    root: HierarchyNode
    nodes: Mapping[int, HierarchyNode]
    leaf_order: tuple[int, ...]

    @property
    def n_classes(self) -> int:
        return len(self.leaf_order)

    def node(self, group_id: int) -> HierarchyNode:
        try:
            return self.nodes[group_id]
        except KeyError:
            raise KeyError(f"unknown group_id {group_id}") from None

    def leaf_labels(self) -> dict[int, str]:
        return {n.class_id: n.label for n in self.root.walk() if n.is_leaf}


@dataclass(frozen=True)
class SampleRecord:
    """One classified sample: ground truth plus ranked predictions."""

    sample_id: str
    true_class: int
    predictions: tuple[tuple[int, float], ...]

    @property
    def predicted(self) -> int:
        return self.predictions[0][0]

    def prob_of(self, class_id: int) -> float | None:
        """Probability the classifier assigned to ``class_id``, if ranked."""
        for cid, p in self.predictions:
            if cid == class_id:
                return p
        return None


@dataclass(frozen=True)
class EvaluationSet:
    """A validated, immutable set of classification results."""

    set_id: str
    samples: tuple[SampleRecord, ...]
    n_classes: int

    @classmethod
    def build(cls, set_id: str, samples: Iterable[SampleRecord],
              n_classes: int | None = None) -> "EvaluationSet":
        """Validate records and freeze them into a set.

        When ``n_classes`` is omitted it is inferred as the largest
        referenced class id + 1.
        """
        samples = tuple(samples)
        if not samples:
            raise FormatError(f"evaluation set {set_id!r} is empty")
        seen: set[str] = set()
        max_cid = -1
        for idx, rec in enumerate(samples):
            where = f"sample {rec.sample_id!r} (index {idx})"
            if rec.sample_id in seen:
                raise FormatError(f"duplicate sample_id {rec.sample_id!r}")
            seen.add(rec.sample_id)
            if not rec.predictions:
                raise FormatError(f"{where}: empty prediction list")
            prev = None
            pred_ids = set()
            for cid, prob in rec.predictions:
                if not (0.0 <= prob <= 1.0):
                    raise FormatError(f"{where}: probability {prob} outside [0,1]")
                if prev is not None and prob > prev:
                    raise FormatError(f"{where}: probabilities not non-increasing")
                prev = prob
                if cid in pred_ids:
                    raise FormatError(f"{where}: class {cid} ranked twice")
                pred_ids.add(cid)
                max_cid = max(max_cid, cid)
            if rec.true_class < 0:
                raise FormatError(f"{where}: negative class id")
            max_cid = max(max_cid, rec.true_class)
        if n_classes is None:
            n_classes = max_cid + 1
        elif max_cid >= n_classes:
            raise FormatError(
                f"set {set_id!r} references class {max_cid} "
                f"but only {n_classes} classes exist")
        return cls(set_id=set_id, samples=samples, n_classes=n_classes)

    @property
    def n_samples(self) -> int:
        return len(self.samples)

    @cached_property
    def sample_ids(self) -> tuple[str, ...]:
        return tuple(s.sample_id for s in self.samples)

    @cached_property
    def id_index(self) -> Mapping[str, int]:
        return MappingProxyType({sid: i for i, sid in enumerate(self.sample_ids)})

    @cached_property
    def true_ids(self) -> np.ndarray:
        arr = np.fromiter((s.true_class for s in self.samples), dtype=np.int64,
                          count=self.n_samples)
        arr.setflags(write=False)
        return arr

    @cached_property
    def top1_ids(self) -> np.ndarray:
        arr = np.fromiter((s.predictions[0][0] for s in self.samples),
                          dtype=np.int64, count=self.n_samples)
        arr.setflags(write=False)
        return arr

    @cached_property
    def top1_probs(self) -> np.ndarray:
        arr = np.fromiter((s.predictions[0][1] for s in self.samples),
                          dtype=np.float64, count=self.n_samples)
        arr.setflags(write=False)
        return arr

    @cached_property
    def true_rank(self) -> np.ndarray:
        """Rank of the true class in each sample's prediction list.

        Samples whose truncated ranking omits the true class get a sentinel
        larger than any usable k.
        """
        sentinel = np.iinfo(np.int64).max
        out = np.full(self.n_samples, sentinel, dtype=np.int64)
        for i, rec in enumerate(self.samples):
            for rank, (cid, _) in enumerate(rec.predictions):
                if cid == rec.true_class:
                    out[i] = rank
                    break
        out.setflags(write=False)
        return out

    @cached_property
    def true_probs(self) -> np.ndarray:
        """Probability assigned to the true class; NaN when not ranked."""
        out = np.full(self.n_samples, np.nan, dtype=np.float64)
        for i, rec in enumerate(self.samples):
            p = rec.prob_of(rec.true_class)
            if p is not None:
                out[i] = p
        out.setflags(write=False)
        return out

    @cached_property
    def pair_counts(self) -> np.ndarray:
        """(true, predicted) tally in identity class order, shape (n, n)."""
        n = self.n_classes
        flat = np.bincount(self.true_ids * n + self.top1_ids, minlength=n * n)
        counts = flat.reshape(n, n)
        counts.setflags(write=False)
        return counts

    def restrict(self, sample_ids: Iterable[str], suffix: str = "subset") -> "EvaluationSet":
        """A new set containing only ``sample_ids``, in this set's order."""
        wanted = set(sample_ids)
        kept = tuple(s for s in self.samples if s.sample_id in wanted)
        if not kept:
            raise ValueError(f"restriction of {self.set_id!r} is empty")
        return EvaluationSet(set_id=f"{self.set_id}:{suffix}", samples=kept,
                             n_classes=self.n_classes)


@dataclass(frozen=True)
class NeuronShape:
    height: int
    width: int

    @property
    def cells(self) -> int:
        return self.height * self.width


@dataclass(frozen=True)
class ResponseTensor:
    """Per-sample, per-neuron channel-grid responses for one layer.

    ``flat`` holds all values as (n_samples, total_cells) float32 with each
    neuron's row-major cells occupying a contiguous column slice.
    """

    layer_id: str
    sample_order: tuple[str, ...]
    neurons: tuple[NeuronShape, ...]
    flat: np.ndarray

    def __post_init__(self):
        self.flat.setflags(write=False)

    @property
    def n_samples(self) -> int:
        return len(self.sample_order)

    @property
    def n_neurons(self) -> int:
        return len(self.neurons)

    @cached_property
    def offsets(self) -> np.ndarray:
        """Start column of each neuron's slice within ``flat``."""
        sizes = [s.cells for s in self.neurons]
        out = np.concatenate([[0], np.cumsum(sizes)])
        out.setflags(write=False)
        return out

    @property
    def total_cells(self) -> int:
        return int(self.offsets[-1])

    @cached_property
    def id_index(self) -> Mapping[str, int]:
        return MappingProxyType({sid: i for i, sid in enumerate(self.sample_order)})

    def response(self, sample: int, neuron: int) -> np.ndarray:
        """The (height, width) response grid of one neuron for one sample."""
        shape = self.neurons[neuron]
        lo, hi = self.offsets[neuron], self.offsets[neuron + 1]
        return self.flat[sample, lo:hi].reshape(shape.height, shape.width)

    @cached_property
    def collective(self) -> np.ndarray:
        """Collective responses, shape (n_samples, n_neurons) float64.

        Entry (s, N) is the sum of all of neuron N's output channels for
        sample s.
        """
        out = np.add.reduceat(self.flat.astype(np.float64), self.offsets[:-1], axis=1)
        out.setflags(write=False)
        return out

    @classmethod
    def build(cls, layer_id: str, sample_order: Sequence[str],
              neurons: Sequence[tuple[int, int]] | Sequence[NeuronShape],
              flat: np.ndarray) -> "ResponseTensor":
        """Validate shapes and value finiteness, then freeze."""
        shapes = tuple(
            s if isinstance(s, NeuronShape) else NeuronShape(*s) for s in neurons)
        sample_order = tuple(sample_order)
        if len(set(sample_order)) != len(sample_order):
            raise FormatError(f"layer {layer_id!r}: duplicate sample ids")
        for s in shapes:
            if s.height < 1 or s.width < 1:
                raise FormatError(f"layer {layer_id!r}: empty neuron shape {s}")
        total = sum(s.cells for s in shapes)
        flat = np.ascontiguousarray(flat, dtype=np.float32)
        if flat.shape != (len(sample_order), total):
            raise FormatError(
                f"layer {layer_id!r}: value array shape {flat.shape} != "
                f"({len(sample_order)}, {total})")
        bad = ~np.isfinite(flat)
        if bad.any():
            s_idx, cell = np.argwhere(bad)[0]
            offsets = np.concatenate([[0], np.cumsum([sh.cells for sh in shapes])])
            n_idx = int(np.searchsorted(offsets, cell, side="right") - 1)
            raise DataError(
                f"layer {layer_id!r}: non-finite response at sample "
                f"{sample_order[s_idx]!r}, neuron {n_idx}")
        return cls(layer_id=layer_id, sample_order=sample_order,
                   neurons=shapes, flat=flat)


# ---------------------------------------------------------------------------
# hierarchy file format


def _parse_hierarchy_node(obj, depth: int):
    if depth > _MAX_HIERARCHY_DEPTH:
        raise FormatError("hierarchy nesting exceeds depth limit (cyclic reference?)")
    if not isinstance(obj, dict):
        raise FormatError(f"hierarchy node must be an object, got {type(obj).__name__}")
    has_class = "class_id" in obj
    has_children = "children" in obj
    if has_class == has_children:
        raise FormatError("hierarchy node must have exactly one of class_id/children")
    label = obj.get("label")
    if label is not None and not isinstance(label, str):
        raise FormatError("hierarchy node label must be a string")
    if has_class:
        cid = obj["class_id"]
        if not isinstance(cid, int) or isinstance(cid, bool) or cid < 0:
            raise FormatError(f"invalid leaf class_id {cid!r}")
        return ("leaf", cid, label)
    children = obj["children"]
    if not isinstance(children, list) or not children:
        raise FormatError("hierarchy children must be a non-empty list")
    return ("group", [_parse_hierarchy_node(c, depth + 1) for c in children], label)


def _contract(parsed):
    """Collapse single-child chains into the deepest node with >= 2 children."""
    kind = parsed[0]
    if kind == "leaf":
        return parsed
    _, children, label = parsed
    if len(children) == 1:
        return _contract(children[0])
    return ("group", [_contract(c) for c in children], label)


def _freeze_hierarchy(parsed, n_classes: int | None) -> ClassHierarchy:
    nodes: dict[int, HierarchyNode] = {}
    leaf_order: list[int] = []
    counter = iter(range(1 << 30))

    def build(p) -> HierarchyNode:
        gid = next(counter)
        if p[0] == "leaf":
            _, cid, label = p
            node = HierarchyNode(group_id=gid, label=label or f"class-{cid}",
                                 children=(), class_ids=frozenset((cid,)))
            leaf_order.append(cid)
        else:
            _, raw_children, label = p
            children = tuple(build(c) for c in raw_children)
            class_ids = frozenset().union(*(c.class_ids for c in children))
            node = HierarchyNode(group_id=gid, label=label or f"group-{gid}",
                                 children=children, class_ids=class_ids)
        nodes[gid] = node
        return node

    root = build(parsed)
    seen: set[int] = set()
    for cid in leaf_order:
        if cid in seen:
            raise FormatError(f"duplicate leaf for class {cid}")
        seen.add(cid)
    expected = n_classes if n_classes is not None else (max(seen) + 1 if seen else 0)
    for cid in range(expected):
        if cid not in seen:
            raise FormatError(f"leaf for class {cid} missing")
    if n_classes is not None and len(seen) != n_classes:
        raise FormatError(
            f"hierarchy has {len(seen)} leaves but {n_classes} classes expected")
    return ClassHierarchy(root=root, nodes=MappingProxyType(nodes),
                          leaf_order=tuple(leaf_order))


def hierarchy_from_json(obj, n_classes: int | None = None) -> ClassHierarchy:
    """Build a contracted hierarchy from a parsed JSON node tree."""
    return _freeze_hierarchy(_contract(_parse_hierarchy_node(obj, 0)), n_classes)


def load_hierarchy(path, n_classes: int | None = None) -> ClassHierarchy:
    """Load, validate and contract a hierarchy file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON: {exc}") from exc
    return hierarchy_from_json(obj, n_classes)


def hierarchy_to_json(hierarchy: ClassHierarchy) -> dict:
    def encode(node: HierarchyNode) -> dict:
        if node.is_leaf:
            return {"label": node.label, "class_id": node.class_id}
        return {"label": node.label, "children": [encode(c) for c in node.children]}

    return encode(hierarchy.root)


def save_hierarchy(hierarchy: ClassHierarchy, path) -> None:
    data = _canon_json(hierarchy_to_json(hierarchy)) + "\n"
    Path(path).write_bytes(data.encode("utf-8"))


def flat_hierarchy(n_classes: int, labels: Mapping[int, str] | None = None) -> ClassHierarchy:
    """Root with one leaf per class — the trivial grouping."""
    labels = labels or {}
    children = [{"label": labels.get(c), "class_id": c} for c in range(n_classes)]
    return hierarchy_from_json({"label": "all", "children": children}, n_classes)


# ---------------------------------------------------------------------------
# predictions file format


def load_predictions(path, set_id: str | None = None,
                     n_classes: int | None = None) -> EvaluationSet:
    """Parse a predictions JSON-Lines file, preserving sample order."""
    records: list[SampleRecord] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}: invalid JSON at line {lineno}: {exc}") from exc
            try:
                sid = obj["sample_id"]
                true = obj["true"]
                pred = obj["pred"]
            except (KeyError, TypeError):
                raise FormatError(
                    f"{path}: line {lineno} missing sample_id/true/pred") from None
            if not isinstance(pred, list) or not pred:
                raise FormatError(f"{path}: empty prediction list at line {lineno}")
            pairs = []
            prev = None
            for entry in pred:
                try:
                    cid, prob = entry
                except (TypeError, ValueError):
                    raise FormatError(
                        f"{path}: malformed prediction pair at line {lineno}") from None
                prob = float(prob)
                if not (0.0 <= prob <= 1.0):
                    raise FormatError(
                        f"{path}: probability {prob} outside [0,1] at line {lineno}")
                if prev is not None and prob > prev:
                    raise FormatError(
                        f"{path}: probabilities not non-increasing at line {lineno}")
                prev = prob
                if n_classes is not None and not (0 <= cid < n_classes):
                    raise FormatError(
                        f"{path}: unknown class_id {cid} at line {lineno}")
                pairs.append((int(cid), prob))
            if n_classes is not None and not (0 <= true < n_classes):
                raise FormatError(f"{path}: unknown class_id {true} at line {lineno}")
            records.append(SampleRecord(sample_id=str(sid), true_class=int(true),
                                        predictions=tuple(pairs)))
    if set_id is None:
        set_id = Path(path).stem
    return EvaluationSet.build(set_id, records, n_classes=n_classes)


def predictions_to_lines(eval_set: EvaluationSet) -> Iterable[str]:
    for rec in eval_set.samples:
        yield _canon_json({
            "sample_id": rec.sample_id,
            "true": rec.true_class,
            "pred": [[cid, prob] for cid, prob in rec.predictions],
        })


def save_predictions(eval_set: EvaluationSet, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in predictions_to_lines(eval_set):
            fh.write(line + "\n")


# ---------------------------------------------------------------------------
# response tensor binary format


def load_responses(data_path, sidecar_path) -> ResponseTensor:
    """Read a BLKR tensor file and its JSON sidecar."""
    raw = Path(data_path).read_bytes()
    if len(raw) < 16:
        raise FormatError(f"{data_path}: file too short for a BLKR header")
    if raw[:4] != _BLKR_MAGIC:
        raise FormatError(f"{data_path}: bad magic {raw[:4]!r}, expected {_BLKR_MAGIC!r}")
    version, n_samples, n_neurons = struct.unpack_from("<III", raw, 4)
    if version != _BLKR_VERSION:
        raise FormatError(f"{data_path}: unsupported version {version}")
    shape_end = 16 + 4 * n_neurons
    if len(raw) < shape_end:
        raise TruncationError(f"{data_path}: truncated neuron shape table")
    shapes = [NeuronShape(*struct.unpack_from("<HH", raw, 16 + 4 * i))
              for i in range(n_neurons)]
    total = sum(s.cells for s in shapes)
    expected = shape_end + 4 * n_samples * total
    if len(raw) != expected:
        raise TruncationError(
            f"{data_path}: payload holds {(len(raw) - shape_end) // 4} float32 values, "
            f"header implies {n_samples * total}")
    values = np.frombuffer(raw, dtype="<f4", offset=shape_end).reshape(n_samples, total)

    try:
        with open(sidecar_path, "r", encoding="utf-8") as fh:
            side = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{sidecar_path}: invalid JSON: {exc}") from exc
    if not isinstance(side, dict) or "layer_id" not in side or "samples" not in side:
        raise FormatError(f"{sidecar_path}: sidecar must define layer_id and samples")
    samples = side["samples"]
    if len(samples) != n_samples:
        raise FormatError(
            f"{sidecar_path}: sidecar lists {len(samples)} samples, "
            f"binary holds {n_samples}")
    return ResponseTensor.build(str(side["layer_id"]), [str(s) for s in samples],
                                shapes, values)


def save_responses(tensor: ResponseTensor, data_path, sidecar_path) -> None:
    header = bytearray()
    header += _BLKR_MAGIC
    header += struct.pack("<III", _BLKR_VERSION, tensor.n_samples, tensor.n_neurons)
    for s in tensor.neurons:
        header += struct.pack("<HH", s.height, s.width)
    values = np.ascontiguousarray(tensor.flat, dtype="<f4")
    Path(data_path).write_bytes(bytes(header) + values.tobytes())
    side = {"layer_id": tensor.layer_id, "samples": list(tensor.sample_order)}
    Path(sidecar_path).write_bytes((_canon_json(side) + "\n").encode("utf-8"))


# ---------------------------------------------------------------------------
# dataset registration


@dataclass(frozen=True)
class DatasetBundle:
    """Immutable registered unit tying classes, hierarchy, results and tensors."""

    dataset_id: str
    classes: tuple[ClassInfo, ...]
    hierarchy: ClassHierarchy
    eval_sets: Mapping[str, EvaluationSet]
    tensors: Mapping[str, ResponseTensor]
    thumbnail_dir: Path | None = None

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def eval_set(self, set_id: str) -> EvaluationSet:
        try:
            return self.eval_sets[set_id]
        except KeyError:
            raise KeyError(f"unknown eval set {set_id!r}") from None

    def tensor(self, layer_id: str) -> ResponseTensor:
        try:
            return self.tensors[layer_id]
        except KeyError:
            raise KeyError(f"unknown layer {layer_id!r}") from None

    def only_set_id(self) -> str:
        """The sole eval set id, for endpoints that default it."""
        if len(self.eval_sets) != 1:
            raise ValueError(
                f"dataset {self.dataset_id!r} has {len(self.eval_sets)} eval sets; "
                "a set_id must be given")
        return next(iter(self.eval_sets))


def register_dataset(hierarchy: ClassHierarchy,
                     eval_sets: Iterable[EvaluationSet] | Mapping[str, EvaluationSet],
                     tensors: Iterable[ResponseTensor] | Mapping[str, ResponseTensor] = (),
                     classes: Sequence[ClassInfo] | None = None,
                     thumbnail_dir=None,
                     dataset_id: str | None = None) -> DatasetBundle:
    """Cross-validate components and freeze them into a queryable bundle."""
    if isinstance(eval_sets, Mapping):
        eval_sets = eval_sets.values()
    sets: dict[str, EvaluationSet] = {}
    for es in eval_sets:
        if es.set_id in sets:
            raise ConsistencyError(f"duplicate eval set id {es.set_id!r}")
        sets[es.set_id] = es
    if not sets:
        raise ConsistencyError("a dataset needs at least one evaluation set")

    n_classes = hierarchy.n_classes
    if classes is None:
        labels = hierarchy.leaf_labels()
        classes = tuple(ClassInfo(c, labels[c]) for c in range(n_classes))
    else:
        classes = tuple(classes)
        ids = sorted(c.class_id for c in classes)
        if ids != list(range(len(classes))):
            raise ConsistencyError("class_id values must be exactly 0..n-1")
        if len(classes) != n_classes:
            raise ConsistencyError(
                f"{len(classes)} classes given but hierarchy has {n_classes} leaves")

    for es in sets.values():
        if es.n_classes != n_classes:
            raise ConsistencyError(
                f"eval set {es.set_id!r} has n_classes={es.n_classes}, "
                f"hierarchy has {n_classes}")

    known_ids: set[str] = set()
    for es in sets.values():
        known_ids.update(es.sample_ids)
    if isinstance(tensors, Mapping):
        tensors = tensors.values()
    tensor_map: dict[str, ResponseTensor] = {}
    for t in tensors:
        if t.layer_id in tensor_map:
            raise ConsistencyError(f"duplicate layer id {t.layer_id!r}")
        for sid in t.sample_order:
            if sid not in known_ids:
                raise ConsistencyError(
                    f"layer {t.layer_id!r} lists sample {sid!r} absent from "
                    "every evaluation set")
        tensor_map[t.layer_id] = t

    if thumbnail_dir is not None:
        thumbnail_dir = Path(thumbnail_dir)

    return DatasetBundle(
        dataset_id=dataset_id or f"ds-{uuid.uuid4().hex[:12]}",
        classes=classes,
        hierarchy=hierarchy,
        eval_sets=MappingProxyType(sets),
        tensors=MappingProxyType(tensor_map),
        thumbnail_dir=thumbnail_dir,
    )


# ---------------------------------------------------------------------------
# dataset manifests (how the CLI and service locate the files of one dataset)


def load_manifest(path) -> dict:
    """Read a dataset manifest; ``path`` may be a directory holding dataset.json."""
    p = Path(path)
    if p.is_dir():
        p = p / "dataset.json"
    if not p.is_file():
        raise FormatError(f"no dataset manifest at {p}")
    try:
        manifest = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{p}: invalid JSON: {exc}") from exc
    if "hierarchy" not in manifest or "predictions" not in manifest:
        raise FormatError(f"{p}: manifest must name hierarchy and predictions files")
    manifest["_base"] = str(p.parent)
    return manifest


def load_bundle(manifest: dict | str | Path) -> DatasetBundle:
    """Materialize a DatasetBundle from a manifest (path or parsed dict)."""
    if not isinstance(manifest, dict):
        manifest = load_manifest(manifest)
    base = Path(manifest.get("_base", "."))

    def resolve(rel) -> Path:
        p = Path(rel)
        return p if p.is_absolute() else base / p

    hierarchy = load_hierarchy(resolve(manifest["hierarchy"]))
    n = hierarchy.n_classes
    sets = [load_predictions(resolve(path), set_id=sid, n_classes=n)
            for sid, path in manifest["predictions"].items()]
    tensors = []
    for layer_id, spec in manifest.get("responses", {}).items():
        t = load_responses(resolve(spec["data"]), resolve(spec["sidecar"]))
        if t.layer_id != layer_id:
            raise ConsistencyError(
                f"manifest names layer {layer_id!r} but sidecar says {t.layer_id!r}")
        tensors.append(t)
    thumbs = manifest.get("thumbnails")
    return register_dataset(
        hierarchy, sets, tensors,
        thumbnail_dir=resolve(thumbs) if thumbs else None,
        dataset_id=manifest.get("dataset_id"),
    )
