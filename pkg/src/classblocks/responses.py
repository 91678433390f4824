"""Class-level response maps, neuron relevance and latent-subclass detection.

A neuron's collective response to a sample is the sum of all its output
channels. Relevance of a neuron to a class group is the ratio of the
group's lower-quartile collective response to the non-group's upper
quartile — high when responses are consistently high inside the group and
consistently low outside. Channels are linearized row-major.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .datamodel import ClassHierarchy, EvaluationSet, ResponseTensor
from .errors import ConsistencyError
from .metrics import ClassGroup
from .seriation import spectral_axis_order


@dataclass(frozen=True)
class ResponseRenderSpec:
    """Rendering contract: values >= threshold saturate, the rest map onto a
    dark-to-light ramp; grids may be average-pooled down to ``downsample``."""

    threshold: float = np.inf
    downsample: tuple[int, int] | None = None

    def validate(self) -> None:
        if not np.isfinite(self.threshold) and self.threshold != np.inf:
            raise ValueError("threshold must be finite (or +inf to disable)")
        if self.downsample is not None:
            h, w = self.downsample
            if h < 1 or w < 1:
                raise ValueError(f"invalid downsample target {self.downsample}")


@dataclass(frozen=True)
class NeuronProfile:
    """Per-class mean responses of one neuron, channels linearized."""

    neuron_id: int
    shape: tuple[int, int]
    values: np.ndarray  # (n_classes_in_order, cells) float64


@dataclass(frozen=True)
class ResponseMap:
    layer_id: str
    set_id: str
    class_order: tuple[int, ...]
    profiles: tuple[NeuronProfile, ...]
    defined: np.ndarray  # per class-order row: False when the class has no samples


@dataclass(frozen=True)
class NeuronRelevance:
    neuron_id: int
    group_id: int
    value: float  # >= 0, may be +inf


@dataclass(frozen=True)
class CorrelationView:
    class_id: int
    layer_id: str
    sample_order: tuple[str, ...]
    corr: np.ndarray
    sample_response_map: np.ndarray


def collective_response(tensor: ResponseTensor, sample: int, neuron: int) -> float:
    """Sum of all output channels of one neuron for one sample."""
    return float(tensor.response(sample, neuron).sum(dtype=np.float64))


def _labels_for_tensor(tensor: ResponseTensor, eval_set: EvaluationSet) -> np.ndarray:
    missing = [sid for sid in tensor.sample_order if sid not in eval_set.id_index]
    if missing:
        raise ConsistencyError(
            f"layer {tensor.layer_id!r} sample {missing[0]!r} is not in "
            f"eval set {eval_set.set_id!r}")
    idx = np.fromiter((eval_set.id_index[sid] for sid in tensor.sample_order),
                      dtype=np.int64, count=tensor.n_samples)
    return eval_set.true_ids[idx]


def _per_class_means(values: np.ndarray, labels: np.ndarray,
                     class_order: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """Mean of ``values`` rows per class, rows arranged by ``class_order``.

    Sums accumulate in float64 per contiguous class run, so the (possibly
    large) float32 tensor is never copied to double precision wholesale.
    """
    n_rows = len(class_order)
    means = np.zeros((n_rows, values.shape[1]), dtype=np.float64)
    counts = np.bincount(labels, minlength=max(class_order) + 1)
    sort = np.argsort(labels, kind="stable")
    sorted_vals = values[sort]
    sorted_labels = labels[sort]
    run_starts = np.flatnonzero(np.r_[True, sorted_labels[1:] != sorted_labels[:-1]])
    run_ends = np.r_[run_starts[1:], len(sorted_labels)]
    by_class = {int(sorted_labels[s]): sorted_vals[s:e].sum(axis=0, dtype=np.float64)
                for s, e in zip(run_starts, run_ends)}
    defined = np.zeros(n_rows, dtype=bool)
    for row, cid in enumerate(class_order):
        if counts[cid] > 0:
            means[row] = by_class[cid] / counts[cid]
            defined[row] = True
    return means, defined


def downsample_profile(grid: np.ndarray, target: tuple[int, int]) -> np.ndarray:
    """Average-pool a grid onto a balanced partition of rows and columns.

    Bands are contiguous and their sizes differ by at most one; each output
    cell is the plain mean of its window.
    """
    grid = np.asarray(grid, dtype=np.float64)
    h, w = grid.shape
    th, tw = target
    if th > h or tw > w:
        raise ValueError(f"downsample target {target} exceeds source {(h, w)}")
    row_edges = [(h * i) // th for i in range(th + 1)]
    col_edges = [(w * j) // tw for j in range(tw + 1)]
    out = np.empty((th, tw), dtype=np.float64)
    for i in range(th):
        for j in range(tw):
            window = grid[row_edges[i]:row_edges[i + 1], col_edges[j]:col_edges[j + 1]]
            out[i, j] = window.mean()
    return out


def build_response_map(tensor: ResponseTensor, eval_set: EvaluationSet,
                       class_order: Sequence[int],
                       render: ResponseRenderSpec | None = None) -> ResponseMap:
    """Per-class mean response profiles in hierarchy order.

    Classes without samples yield zeroed rows flagged undefined so they stay
    out of color normalization.
    """
    render = render or ResponseRenderSpec()
    render.validate()
    labels = _labels_for_tensor(tensor, eval_set)
    class_order = tuple(int(c) for c in class_order)
    means, defined = _per_class_means(tensor.flat, labels, class_order)

    profiles = []
    for n_idx, shape in enumerate(tensor.neurons):
        lo, hi = tensor.offsets[n_idx], tensor.offsets[n_idx + 1]
        block = means[:, lo:hi]
        out_shape = (shape.height, shape.width)
        if render.downsample is not None:
            th = min(render.downsample[0], shape.height)
            tw = min(render.downsample[1], shape.width)
            pooled = np.stack([
                downsample_profile(row.reshape(shape.height, shape.width), (th, tw)).ravel()
                for row in block])
            block, out_shape = pooled, (th, tw)
        profiles.append(NeuronProfile(neuron_id=n_idx, shape=out_shape,
                                      values=np.ascontiguousarray(block)))
    return ResponseMap(layer_id=tensor.layer_id, set_id=eval_set.set_id,
                       class_order=class_order, profiles=tuple(profiles),
                       defined=defined)


def quantile(values, i: int, q: int) -> float:
    """The i-th q-quantile with linear interpolation at (count-1)*i/q."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("quantile of an empty multiset")
    if not (0 < i < q):
        raise ValueError(f"need 0 < i < q, got i={i}, q={q}")
    return float(np.quantile(values, i / q))


def _relevance_value(num: float, den: float) -> float:
    if den > 0.0:
        return max(num / den, 0.0)
    return np.inf if num > 0.0 else 0.0


def _group_split(tensor: ResponseTensor, eval_set: EvaluationSet,
                 g: ClassGroup) -> tuple[np.ndarray, np.ndarray]:
    labels = _labels_for_tensor(tensor, eval_set)
    lut = np.zeros(eval_set.n_classes, dtype=bool)
    lut[np.fromiter(g.class_ids, dtype=np.int64)] = True
    in_g = lut[labels]
    if not in_g.any() or in_g.all():
        raise ValueError(
            f"group {g.group_id} needs samples both inside and outside it")
    return in_g, labels


def neuron_relevance(tensor: ResponseTensor, eval_set: EvaluationSet,
                     g: ClassGroup, neuron: int) -> NeuronRelevance:
    """Lower-quartile group response over upper-quartile non-group response."""
    in_g, _ = _group_split(tensor, eval_set, g)
    f = tensor.collective[:, neuron]
    num = np.quantile(f[in_g], 0.25)
    den = np.quantile(f[~in_g], 0.75)
    return NeuronRelevance(neuron_id=neuron, group_id=g.group_id,
                           value=_relevance_value(float(num), float(den)))


def rank_neurons(tensor: ResponseTensor, eval_set: EvaluationSet,
                 g: ClassGroup) -> list[NeuronRelevance]:
    """All neurons by descending relevance; ties by ascending neuron id."""
    in_g, _ = _group_split(tensor, eval_set, g)
    f = tensor.collective
    nums = np.quantile(f[in_g], 0.25, axis=0)
    dens = np.quantile(f[~in_g], 0.75, axis=0)
    rel = [NeuronRelevance(neuron_id=i, group_id=g.group_id,
                           value=_relevance_value(float(nums[i]), float(dens[i])))
           for i in range(tensor.n_neurons)]
    rel.sort(key=lambda r: (-r.value, r.neuron_id))
    return rel


def group_average_response(tensor: ResponseTensor, eval_set: EvaluationSet,
                           hierarchy: ClassHierarchy,
                           neuron: int) -> dict[int, float | None]:
    """Mean collective response of one neuron per hierarchy group.

    Groups with no samples in the tensor map to None.
    """
    labels = _labels_for_tensor(tensor, eval_set)
    f = tensor.collective[:, neuron]
    n = eval_set.n_classes
    sums = np.bincount(labels, weights=f, minlength=n)
    counts = np.bincount(labels, minlength=n)
    out: dict[int, float | None] = {}
    for node in hierarchy.root.walk():
        cids = np.fromiter(node.class_ids, dtype=np.int64)
        total = counts[cids].sum()
        out[node.group_id] = float(sums[cids].sum() / total) if total > 0 else None
    return out


def _pearson_rows(X: np.ndarray) -> np.ndarray:
    """Row-by-row Pearson correlations; zero-variance rows correlate 0 with
    everything else and 1 with themselves."""
    X = X.astype(np.float64, copy=False)
    centered = X - X.mean(axis=1, keepdims=True)
    norms = np.sqrt((centered * centered).sum(axis=1))
    safe = np.where(norms > 0, norms, 1.0)
    corr = (centered @ centered.T) / np.outer(safe, safe)
    corr[norms == 0, :] = 0.0
    corr[:, norms == 0] = 0.0
    np.fill_diagonal(corr, 1.0)
    return np.clip(corr, -1.0, 1.0)


def correlation_view(tensor: ResponseTensor, eval_set: EvaluationSet,
                     class_id: int) -> CorrelationView:
    """Sample-by-sample correlation of layer responses within one class,
    spectrally reordered so latent subclasses surface as diagonal blocks."""
    labels = _labels_for_tensor(tensor, eval_set)
    member_rows = np.flatnonzero(labels == class_id)
    if member_rows.size < 2:
        raise ValueError(
            f"class {class_id} has {member_rows.size} samples in layer "
            f"{tensor.layer_id!r}; need at least 2")
    X = tensor.flat[member_rows].astype(np.float64)
    corr = _pearson_rows(X)
    sim = (corr + 1.0) / 2.0
    np.fill_diagonal(sim, 0.0)
    perm = spectral_axis_order(sim, tiebreak=list(range(len(member_rows))))
    ordered = [int(member_rows[i]) for i in perm]
    ids = tuple(tensor.sample_order[i] for i in ordered)
    perm = np.asarray(perm)
    return CorrelationView(class_id=class_id, layer_id=tensor.layer_id,
                           sample_order=ids,
                           corr=corr[np.ix_(perm, perm)],
                           sample_response_map=X[perm])
