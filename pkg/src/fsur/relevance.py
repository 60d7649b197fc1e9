"""Per-feature relevance profiles: unique relevance, conditional relevance,
and irrelevance.

Unique relevance of a feature is the joint-MI loss from dropping it out of
the full feature set; it can be estimated information-theoretically (the
neighbor/plug-in estimators) or through the out-of-fold cross-entropy of a
classifier that predicts the label without the feature.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import Dataset, FeatureKind, stratified_kfold
from .estimators import EstimatorConfig, cond_mi, entropy_knn, entropy_plugin, joint_mi, mi_plugin
from .knn import knn_predict_proba


@dataclass
class RelevanceProfile:
    """Per-feature relevance numbers.

    ur_raw : unique relevance in nats (KSG path, clipped at 0) or the
        out-of-fold cross-entropy of predicting the label without the
        feature (CLF path).
    ur_norm : min-max normalized ur_raw in [0, 1]; all 0.5 when the raw
        values are identical, so a boost shifts every score equally.
    marginal_mi : I(feature; label) per feature.
    irrelevance : H(feature | label) per feature; differential-entropy based
        for continuous features, so not comparable across kinds.
    """

    ur_raw: np.ndarray
    ur_norm: np.ndarray
    marginal_mi: np.ndarray
    irrelevance: np.ndarray
    ur_estimator: str

    def to_records(self, names) -> list[dict]:
        return [
            {
                "index": j,
                "name": names[j],
                "ur_raw": float(self.ur_raw[j]),
                "ur_norm": float(self.ur_norm[j]),
                "marginal_mi": float(self.marginal_mi[j]),
                "irrelevance": float(self.irrelevance[j]),
            }
            for j in range(len(self.ur_raw))
        ]


def minmax_normalize(values: np.ndarray) -> np.ndarray:
    """Min-max rescale to [0, 1]; a constant vector maps to all 0.5."""
    values = np.asarray(values, dtype=np.float64)
    lo, hi = float(values.min()), float(values.max())
    if hi > lo:
        return (values - lo) / (hi - lo)
    return np.full(values.shape, 0.5)


def irrelevance(d: Dataset, x: int, cfg: EstimatorConfig) -> float:
    """H(feature | label): the part of a feature's entropy that carries no
    label information.  Exact plug-in arithmetic for discrete features; a
    k-NN differential entropy minus the neighbor MI for continuous ones."""
    if not 0 <= x < d.n_features:
        raise ValueError(f"feature index {x} out of range")
    col = d.features[:, [x]]
    if d.kinds[x] is FeatureKind.DISCRETE:
        return entropy_plugin(col) - mi_plugin(col, d.label).value
    return entropy_knn(col, cfg, x_ids=(x,)) - joint_mi(d, [x], cfg).value


def cond_relevance(d: Dataset, x: int, w, cfg: EstimatorConfig) -> float:
    """I(feature; label | w), the information a feature adds given the set w."""
    return cond_mi(d, [x], w, cfg)


def ur_ksg(d: Dataset, cfg: EstimatorConfig, threads: int = 1) -> RelevanceProfile:
    """Unique relevance per feature as the leave-one-out joint-MI drop.

    The full-set joint MI is computed once; each feature then costs one
    joint MI over the remaining features.  Neighbor-estimator noise can make
    the difference slightly negative, so raw values are clipped at zero.
    """
    m = d.n_features
    if m < 2:
        raise ValueError("unique relevance needs at least 2 features")
    full = joint_mi(d, range(m), cfg).value

    def one(k: int) -> tuple[float, float, float]:
        rest = [j for j in range(m) if j != k]
        try:
            loo = joint_mi(d, rest, cfg).value
            marg = joint_mi(d, [k], cfg).value
            irr = irrelevance(d, k, cfg)
        except ValueError as e:
            raise ValueError(f"feature {k} ({d.names[k]}): {e}") from e
        return max(0.0, full - loo), marg, irr

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, range(m)))
    else:
        rows = [one(k) for k in range(m)]
    ur_raw = np.array([r[0] for r in rows])
    marginal = np.array([r[1] for r in rows])
    irr = np.array([r[2] for r in rows])
    return RelevanceProfile(ur_raw=ur_raw, ur_norm=minmax_normalize(ur_raw),
                            marginal_mi=marginal, irrelevance=irr, ur_estimator="ksg")


def ur_clf(d: Dataset, folds: int = 5, knn_k: int = 5, smoothing: float = 1.0,
           seed: int = 0, cfg: EstimatorConfig | None = None) -> RelevanceProfile:
    """Unique relevance per feature from a KNN likelihood model.

    For each feature, out-of-fold class probabilities are computed from all
    remaining features and ur_raw is the mean negative log-likelihood of the
    true labels: the empirical cross-entropy of predicting the label without
    that feature.  Removing a feature nothing else can stand in for makes
    the label harder to predict and the cross-entropy larger.
    """
    m = d.n_features
    if m < 2:
        raise ValueError("unique relevance needs at least 2 features: "
                         "removing the only feature leaves no predictors")
    if smoothing <= 0:
        raise ValueError("smoothing must be positive to keep likelihoods finite")
    fold_plan = stratified_kfold(d.label, folds, seed)
    min_train = min(len(tr) for tr, _ in fold_plan)
    if knn_k >= min_train:
        raise ValueError(f"knn_k={knn_k} must be below the smallest training fold ({min_train})")

    ur_raw = np.empty(m)
    for k in range(m):
        keep = [j for j in range(m) if j != k]
        feats = d.features[:, keep]
        kinds = tuple(d.kinds[j] for j in keep)
        log_lik = np.empty(d.n_samples)
        for tr, held in fold_plan:
            probs = knn_predict_proba(feats[tr], d.label[tr], d.n_classes, kinds,
                                      feats[held], knn_k, smoothing)
            log_lik[held] = np.log(probs[np.arange(held.size), d.label[held]])
        ur_raw[k] = -float(np.mean(log_lik))

    est = cfg or EstimatorConfig()
    marginal = np.array([joint_mi(d, [j], est).value for j in range(m)])
    irr = np.array([irrelevance(d, j, est) for j in range(m)])
    return RelevanceProfile(ur_raw=ur_raw, ur_norm=minmax_normalize(ur_raw),
                            marginal_mi=marginal, irrelevance=irr, ur_estimator="clf")
