"""Linear probes: measure a layer's class-separation power.

A multinomial logistic regression is trained by full-batch gradient
descent with backtracking (the step is halved whenever it would increase
the regularized loss), so the loss trace is non-increasing by
construction. Predictions come back as an ordinary evaluation set and flow
into the same confusion/metric machinery as ingested results.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .datamodel import EvaluationSet, ResponseTensor, SampleRecord

_MIN_STEP = 1e-20


@dataclass(frozen=True)
class ProbeConfig:
    layer_id: str
    max_epochs: int = 500
    initial_step: float = 0.1
    l2_penalty: float = 1e-4
    tolerance: float = 1e-7
    seed: int = 0
    holdout_fraction: float = 0.0  # 0 trains on all ingested samples

    def validate(self) -> None:
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be positive")
        if self.initial_step <= 0:
            raise ValueError("initial_step must be positive")
        if self.l2_penalty < 0:
            raise ValueError("l2_penalty must be non-negative")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if not (0.0 <= self.holdout_fraction < 1.0):
            raise ValueError("holdout_fraction must be in [0, 1)")


@dataclass(frozen=True)
class FeatureMatrix:
    """Standardized per-sample features with the column bookkeeping needed
    to map back to (neuron, row, col)."""

    X: np.ndarray  # (n_samples, n_kept) float64, zero mean / unit variance
    kept: np.ndarray  # original column index of each kept feature
    dropped: tuple[int, ...]  # original indices of zero-variance columns
    mean: np.ndarray
    std: np.ndarray

    @property
    def n_features(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray  # (n_classes, n_features)
    bias: np.ndarray  # (n_classes,)
    loss_trace: tuple[float, ...]
    n_classes: int


def extract_features(tensor: ResponseTensor) -> FeatureMatrix:
    """Concatenate all channel responses per sample and standardize columns.

    Zero-variance columns are dropped and recorded. Feature order is
    (neuron, row, col) lexicographic — the tensor's storage order.
    """
    X = tensor.flat.astype(np.float64)
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    keep = std > 0.0
    kept = np.flatnonzero(keep)
    dropped = tuple(int(i) for i in np.flatnonzero(~keep))
    Z = (X[:, keep] - mean[keep]) / std[keep]
    return FeatureMatrix(X=Z, kept=kept, dropped=dropped,
                         mean=mean[keep], std=std[keep])


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _loss_and_grad(W, b, X, Y, labels, l2):
    n = X.shape[0]
    P = _softmax(X @ W.T + b)
    ce = -np.log(np.maximum(P[np.arange(n), labels], 1e-300)).mean()
    loss = ce + 0.5 * l2 * float((W * W).sum())
    D = (P - Y) / n
    gW = D.T @ X + l2 * W
    gb = D.sum(axis=0)
    return loss, gW, gb


def _loss_only(W, b, X, labels, l2):
    n = X.shape[0]
    P = _softmax(X @ W.T + b)
    ce = -np.log(np.maximum(P[np.arange(n), labels], 1e-300)).mean()
    return ce + 0.5 * l2 * float((W * W).sum())


def train_probe(features: FeatureMatrix | np.ndarray, labels: Sequence[int],
                config: ProbeConfig, n_classes: int | None = None,
                on_epoch=None) -> LinearModel:
    """Fit the probe; deterministic for a given config and seed.

    The seed only matters when ``holdout_fraction`` > 0, where it draws the
    training subset; the descent itself is full-batch and exact.
    ``on_epoch(epoch, max_epochs, loss)`` is invoked after every accepted
    step — background jobs use it for progress and cooperative cancellation
    (any exception it raises aborts training).
    """
    config.validate()
    X = features.X if isinstance(features, FeatureMatrix) else np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape[0] != X.shape[0]:
        raise ValueError("labels and feature rows disagree")
    if n_classes is None:
        n_classes = int(labels.max()) + 1
    if len(np.unique(labels)) < 2:
        raise ValueError("training needs at least 2 distinct classes")

    if config.holdout_fraction > 0.0:
        rng = np.random.default_rng(config.seed)
        n_train = max(2, int(round(X.shape[0] * (1.0 - config.holdout_fraction))))
        train_idx = rng.permutation(X.shape[0])[:n_train]
        if len(np.unique(labels[train_idx])) < 2:
            raise ValueError("training split collapsed to a single class")
        X_fit, y_fit = X[train_idx], labels[train_idx]
    else:
        X_fit, y_fit = X, labels

    Y = np.zeros((X_fit.shape[0], n_classes), dtype=np.float64)
    Y[np.arange(X_fit.shape[0]), y_fit] = 1.0

    W = np.zeros((n_classes, X.shape[1]), dtype=np.float64)
    b = np.zeros(n_classes, dtype=np.float64)
    step = config.initial_step
    loss, gW, gb = _loss_and_grad(W, b, X_fit, Y, y_fit, config.l2_penalty)
    trace = [loss]
    for epoch in range(config.max_epochs):
        while True:
            W_new = W - step * gW
            b_new = b - step * gb
            new_loss = _loss_only(W_new, b_new, X_fit, y_fit, config.l2_penalty)
            if new_loss <= loss:
                break
            step *= 0.5
            if step < _MIN_STEP:
                W_new, b_new, new_loss = W, b, loss
                break
        delta = loss - new_loss
        W, b, loss = W_new, b_new, new_loss
        trace.append(loss)
        if on_epoch is not None:
            on_epoch(epoch + 1, config.max_epochs, loss)
        if delta < config.tolerance:
            break
        _, gW, gb = _loss_and_grad(W, b, X_fit, Y, y_fit, config.l2_penalty)
    return LinearModel(weights=W, bias=b, loss_trace=tuple(trace),
                       n_classes=n_classes)


def probe_predictions(model: LinearModel, features: FeatureMatrix | np.ndarray,
                      sample_ids: Sequence[str], true_labels: Sequence[int],
                      set_id: str, top_m: int | None = None) -> EvaluationSet:
    """Score samples and emit a standard evaluation set.

    Class scores become probabilities via normalized exponentials; rankings
    are sorted by descending probability with class-id tie-breaks and may be
    truncated to ``top_m``.
    """
    X = features.X if isinstance(features, FeatureMatrix) else np.asarray(features, dtype=np.float64)
    if X.shape[1] != model.weights.shape[1]:
        raise ValueError(
            f"feature dimension {X.shape[1]} does not match model "
            f"({model.weights.shape[1]})")
    if not (len(sample_ids) == len(true_labels) == X.shape[0]):
        raise ValueError("sample_ids, true_labels and feature rows disagree")
    P = _softmax(X @ model.weights.T + model.bias)
    m = model.n_classes if top_m is None else min(top_m, model.n_classes)
    class_ids = np.arange(model.n_classes)
    records = []
    for i, sid in enumerate(sample_ids):
        ranked = np.lexsort((class_ids, -P[i]))[:m]
        preds = tuple((int(c), float(P[i, c])) for c in ranked)
        records.append(SampleRecord(sample_id=str(sid),
                                    true_class=int(true_labels[i]),
                                    predictions=preds))
    return EvaluationSet.build(set_id, records, n_classes=model.n_classes)


def probe_layer(tensor: ResponseTensor, eval_set: EvaluationSet,
                config: ProbeConfig, top_m: int | None = None) -> EvaluationSet:
    """End-to-end probe of one layer: features -> model -> evaluation set
    with set id ``probe:<layer_id>``."""
    feats = extract_features(tensor)
    idx = [eval_set.id_index[sid] for sid in tensor.sample_order]
    labels = eval_set.true_ids[idx]
    model = train_probe(feats, labels, config, n_classes=eval_set.n_classes)
    return probe_predictions(model, feats, tensor.sample_order, labels,
                             set_id=f"probe:{tensor.layer_id}", top_m=top_m)
