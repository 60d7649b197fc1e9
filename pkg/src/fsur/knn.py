"""A small deterministic KNN classifier used for evaluation and for the
classifier-based unique-relevance estimate."""

from __future__ import annotations

import numpy as np

from .data import FeatureKind


def _scale_stats(train_features: np.ndarray, kinds) -> tuple[np.ndarray, np.ndarray]:
    """Per-column shift/scale: z-score continuous columns from training
    statistics, leave discrete columns untouched."""
    mean = np.zeros(train_features.shape[1])
    scale = np.ones(train_features.shape[1])
    for j, kind in enumerate(kinds):
        if kind is FeatureKind.CONTINUOUS:
            mean[j] = train_features[:, j].mean()
            sd = train_features[:, j].std()
            scale[j] = sd if sd > 0 else 1.0
    return mean, scale


def knn_predict_proba(train_features: np.ndarray, train_label: np.ndarray, n_classes: int,
                      kinds, query: np.ndarray, k: int, smoothing: float = 1.0) -> np.ndarray:
    """Class-probability matrix for query rows from a k-nearest-neighbor vote.

    Distances are Euclidean on columns z-scored with training statistics
    (discrete columns enter raw).  Distance ties break toward the lower
    training-row index, and probabilities are smoothed vote fractions
    (votes + smoothing) / (k + smoothing * C), so rows always sum to one.
    """
    train_features = np.asarray(train_features, dtype=np.float64)
    query = np.asarray(query, dtype=np.float64)
    if query.ndim == 1:
        query = query[None, :]
    n_train = train_features.shape[0]
    if query.shape[1] != train_features.shape[1]:
        raise ValueError(
            f"query has {query.shape[1]} columns, training data has {train_features.shape[1]}")
    if k < 1 or k > n_train:
        raise ValueError(f"k={k} must be in [1, {n_train}]")
    mean, scale = _scale_stats(train_features, kinds)
    t = (train_features - mean) / scale
    q = (query - mean) / scale
    # squared distances preserve the ordering and the ties
    d2 = np.sum(q**2, axis=1)[:, None] + np.sum(t**2, axis=1)[None, :] - 2.0 * (q @ t.T)
    np.maximum(d2, 0.0, out=d2)
    order = np.argsort(d2, axis=1, kind="stable")[:, :k]
    votes = np.zeros((query.shape[0], n_classes))
    labels = np.asarray(train_label, dtype=np.int64)
    for i in range(query.shape[0]):
        votes[i] = np.bincount(labels[order[i]], minlength=n_classes)
    return (votes + smoothing) / (k + smoothing * n_classes)


def knn_accuracy(train_features, train_label, n_classes, kinds, query, query_label,
                 k: int, smoothing: float = 1.0) -> float:
    """Fraction of query rows whose highest-probability class is correct.

    Probability ties resolve to the lowest class index.
    """
    probs = knn_predict_proba(train_features, train_label, n_classes, kinds, query, k, smoothing)
    pred = np.argmax(probs, axis=1)
    return float(np.mean(pred == np.asarray(query_label)))
