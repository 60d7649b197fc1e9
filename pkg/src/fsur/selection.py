"""Greedy forward feature selection with five MI scoring criteria and an
optional unique-relevance boost.

Each step scores every unselected feature, optionally blends the score with
the feature's normalized unique relevance, and takes the argmax with ties
broken toward the lowest feature index.  MI quantities are memoized in an
MICache keyed by content, so repeated or overlapping queries cost one
estimator call.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .cache import MICache, cache_key
from .data import Dataset, FeatureKind, as_subset
from .estimators import EstimatorConfig, MIValue, joint_mi, mi_ksg, mi_plugin
from .relevance import RelevanceProfile, ur_clf, ur_ksg

METHODS = ("mim", "mrmr", "jmi", "jmim", "gsa")


@dataclass(frozen=True)
class ScoreConfig:
    """What to select and how to score it.

    beta blends the base criterion with the normalized unique relevance:
    (1 - beta) * score + beta * ur_norm.  beta == 0 is the plain criterion
    and requires ur_source None; beta > 0 requires a UR source ('ksg' or
    'clf').  budget is the number of features to select (None = all).
    """

    method: str = "gsa"
    beta: float = 0.1
    ur_source: str | None = "ksg"
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    budget: int | None = None
    clf_folds: int = 5
    clf_knn_k: int = 5
    clf_smoothing: float = 1.0
    clf_seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}, expected one of {METHODS}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must be in [0, 1]")
        src = self.ur_source
        if src not in (None, "ksg", "clf"):
            raise ValueError(f"unknown ur_source {src!r}")
        if (self.beta > 0) != (src is not None):
            raise ValueError(
                f"beta={self.beta} conflicts with ur_source={src!r}: "
                "beta=0 requires ur_source none and beta>0 requires a UR source")
        if self.budget is not None and self.budget < 1:
            raise ValueError("budget must be >= 1")


@dataclass
class SelectionTrace:
    """Result of a greedy selection run.

    order : features in selection order.
    step_scores : the winning (boost-applied) score at each step.
    joint_mi_curve : I(selected-so-far; label) after each step.
    timing : seconds spent per step.
    """

    order: tuple[int, ...]
    step_scores: list[float]
    joint_mi_curve: list[float]
    config: ScoreConfig
    ur_profile: RelevanceProfile | None
    timing: list[float]

    def to_payload(self, names) -> dict:
        entries = [
            {"index": int(i), "name": names[i], "score": self.step_scores[t],
             "joint_mi": self.joint_mi_curve[t]}
            for t, i in enumerate(self.order)
        ]
        out = {
            "method": self.config.method,
            "beta": self.config.beta,
            "ur_source": self.config.ur_source,
            "order": entries,
        }
        if self.ur_profile is not None:
            out["ur_profile"] = self.ur_profile.to_records(names)
        return out


class ScoreState:
    """Memoized MI queries for one (dataset, estimator config) pair."""

    def __init__(self, d: Dataset, cfg: EstimatorConfig, cache: MICache | None = None):
        self.d = d
        self.cfg = cfg
        self.cache = cache if cache is not None else MICache()
        self._cfg_hash = cfg.key()

    def _get(self, kind: str, indices, compute) -> float:
        key = cache_key(self.d.content_hash, kind, indices, self._cfg_hash)
        return self.cache.get_or_compute(key, compute).value

    def label_mi(self, indices) -> float:
        """I(features; label) for a subset, cached under the sorted indices."""
        idx = tuple(sorted(as_subset(indices, self.d.n_features)))
        return self._get("label", idx, lambda: joint_mi(self.d, idx, self.cfg))

    def feature_mi(self, i: int, j: int) -> float:
        """I(X_i; X_j) between two features, plug-in when both are discrete."""
        a, b = (i, j) if i < j else (j, i)

        def compute() -> MIValue:
            cols = self.d.features
            if (self.d.kinds[a] is FeatureKind.DISCRETE
                    and self.d.kinds[b] is FeatureKind.DISCRETE
                    and self.cfg.family in ("auto", "plugin")):
                return mi_plugin(cols[:, [a]], cols[:, [b]])
            return mi_ksg(cols[:, [a]], cols[:, [b]], self.cfg, x_ids=(a,), y_ids=(b,))

        return self._get("pair", (a, b), compute)


def score_mim(x: int, state: ScoreState, selected=()) -> float:
    """Marginal relevance I(X_x; label), independent of the selected set."""
    return state.label_mi([x])


def score_mrmr(x: int, state: ScoreState, selected=()) -> float:
    """Marginal relevance minus the mean pairwise MI with selected features."""
    base = state.label_mi([x])
    if not selected:
        return base
    penalty = sum(state.feature_mi(x, j) for j in selected) / len(selected)
    return base - penalty


def score_jmi(x: int, state: ScoreState, selected=()) -> float:
    """Sum over selected j of I(X_x, X_j; label); marginal MI when nothing
    is selected yet."""
    if not selected:
        return state.label_mi([x])
    return sum(state.label_mi([x, j]) for j in selected)


def score_jmim(x: int, state: ScoreState, selected=()) -> float:
    """Min over selected j of I(X_x, X_j; label); marginal MI when nothing
    is selected yet."""
    if not selected:
        return state.label_mi([x])
    return min(state.label_mi([x, j]) for j in selected)


def score_gsa(x: int, state: ScoreState, selected=()) -> float:
    """Joint MI of the would-be selected set, I(selected + {x}; label)."""
    return state.label_mi(list(selected) + [x])


_SCORERS = {"mim": score_mim, "mrmr": score_mrmr, "jmi": score_jmi,
            "jmim": score_jmim, "gsa": score_gsa}


def apply_bur(j_org: float, x: int, cfg: ScoreConfig, profile: RelevanceProfile | None,
              n_selected: int) -> float:
    """Blend a base score with the feature's normalized unique relevance.

    At beta == 0 the base score is returned untouched (bit-identical plain
    criterion).  For JMI with beta > 0 the unbounded running sum is divided
    by the selected-set size before blending (no-op at step one).
    """
    if cfg.beta == 0.0:
        return j_org
    if profile is None:
        raise ValueError("beta > 0 requires a unique-relevance profile")
    j_adj = j_org
    if cfg.method == "jmi" and n_selected >= 1:
        j_adj = j_org / n_selected
    return (1.0 - cfg.beta) * j_adj + cfg.beta * float(profile.ur_norm[x])


def argmax_lowest_index(scores: np.ndarray) -> int:
    """Position of the maximum, ties resolved to the lowest position."""
    return int(np.argmax(scores))


def compute_profile(d: Dataset, cfg: ScoreConfig, threads: int = 1) -> RelevanceProfile:
    if cfg.ur_source == "ksg":
        return ur_ksg(d, cfg.estimator, threads=threads)
    if cfg.ur_source == "clf":
        return ur_clf(d, folds=cfg.clf_folds, knn_k=cfg.clf_knn_k,
                      smoothing=cfg.clf_smoothing, seed=cfg.clf_seed, cfg=cfg.estimator)
    raise ValueError("no ur_source configured")


def select(d: Dataset, cfg: ScoreConfig, profile: RelevanceProfile | None = None,
           cache: MICache | None = None, threads: int = 1) -> SelectionTrace:
    """Greedy forward selection of cfg.budget features.

    The unique-relevance profile is computed once up front when boosting is
    on (or taken from the caller); with beta == 0 a supplied profile is
    rejected to keep the plain criterion honest.  Estimator failures abort
    with the step and candidate identified.
    """
    m = d.n_features
    budget = m if cfg.budget is None else cfg.budget
    if budget > m:
        raise ValueError(f"budget {budget} exceeds the {m} available features")
    if cfg.beta == 0.0 and profile is not None:
        raise ValueError("a UR profile was supplied but beta=0 ignores it; drop one")
    if cfg.beta > 0.0 and profile is None:
        profile = compute_profile(d, cfg, threads=threads)

    state = ScoreState(d, cfg.estimator, cache)
    scorer = _SCORERS[cfg.method]
    selected: list[int] = []
    step_scores: list[float] = []
    curve: list[float] = []
    timing: list[float] = []
    remaining = list(range(m))
    for step in range(budget):
        t0 = time.perf_counter()
        scores = np.empty(len(remaining))
        for pos, x in enumerate(remaining):
            try:
                base = scorer(x, state, tuple(selected))
                scores[pos] = apply_bur(base, x, cfg, profile, len(selected))
            except ValueError as e:
                raise ValueError(f"step {step + 1}, candidate {x} ({d.names[x]}): {e}") from e
        win = argmax_lowest_index(scores)
        chosen = remaining.pop(win)
        selected.append(chosen)
        step_scores.append(float(scores[win]))
        curve.append(state.label_mi(selected))
        timing.append(time.perf_counter() - t0)
    return SelectionTrace(order=tuple(selected), step_scores=step_scores,
                          joint_mi_curve=curve, config=cfg, ur_profile=profile,
                          timing=timing)
