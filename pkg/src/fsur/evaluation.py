"""Split / select / tune / test evaluation protocol.

Each run draws a fresh stratified train/validation/test split, selects
features on the training split only, sweeps the validation accuracy over
growing feature prefixes with a grid-searched KNN, picks the smallest
prefix attaining the best validation accuracy, and scores that choice once
on the test split.  Test rows are provably untouched before that final
scoring step.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace

import numpy as np

from .cache import MICache
from .data import Dataset, SplitSpec, split_dataset
from .knn import knn_accuracy
from .selection import ScoreConfig, SelectionTrace, compute_profile, select


@dataclass(frozen=True)
class EvalConfig:
    """Protocol parameters.

    k_budget caps the feature-prefix sweep (None = all features); knn_grid
    is the neighbor-count grid searched on validation accuracy.
    """

    score_config: ScoreConfig
    runs: int = 20
    split: SplitSpec = field(default_factory=SplitSpec)
    k_budget: int | None = None
    knn_grid: tuple[int, ...] = tuple(range(3, 51, 2))
    knn_smoothing: float = 1.0
    master_seed: int = 0

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if not self.knn_grid:
            raise ValueError("knn_grid must not be empty")


@dataclass
class EvalReport:
    mean_acc: float
    std_acc: float
    mean_n_features: float
    per_run: list[dict]

    def to_payload(self, cfg: EvalConfig) -> dict:
        return {
            "method": cfg.score_config.method,
            "beta": cfg.score_config.beta,
            "ur_source": cfg.score_config.ur_source,
            "runs": cfg.runs,
            "mean_acc": self.mean_acc,
            "std_acc": self.std_acc,
            "mean_n_features": self.mean_n_features,
            "per_run": self.per_run,
        }


def derive_seed(master_seed: int, run_index: int, stream: str = "split") -> int:
    """Stable per-run seed from the master seed (never Python's salted hash)."""
    digest = hashlib.sha256(f"{master_seed}:{run_index}:{stream}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def validation_curve(train: Dataset, val: Dataset, trace: SelectionTrace,
                     k_budget: int, knn_grid, smoothing: float = 1.0):
    """Best validation accuracy per feature-prefix size.

    For each n the KNN neighbor count is grid-searched on validation
    accuracy (grid ties keep the smaller count).  Returns the accuracy
    curve and the winning neighbor count per n.
    """
    if k_budget > len(trace.order):
        raise ValueError(f"k_budget {k_budget} exceeds the trace length {len(trace.order)}")
    curve = np.empty(k_budget)
    best_ks = []
    max_k = train.n_samples
    for n in range(1, k_budget + 1):
        keep = list(trace.order[:n])
        kinds = tuple(train.kinds[j] for j in keep)
        best_acc, best_k = -1.0, None
        for k in knn_grid:
            if k > max_k:
                continue
            acc = knn_accuracy(train.features[:, keep], train.label, train.n_classes,
                               kinds, val.features[:, keep], val.label, k, smoothing)
            if acc > best_acc:
                best_acc, best_k = acc, k
        if best_k is None:
            raise ValueError(f"no knn_grid value fits the training size {max_k}")
        curve[n - 1] = best_acc
        best_ks.append(best_k)
    return curve, best_ks


def _assert_no_leakage(train: Dataset, val: Dataset, test: Dataset, n_total: int) -> None:
    """The three splits must partition the source rows exactly."""
    tr = set(train.source_rows.tolist())
    va = set(val.source_rows.tolist())
    te = set(test.source_rows.tolist())
    if tr & te or va & te or tr & va:
        raise AssertionError("split leakage: shared rows between splits")
    if len(tr) + len(va) + len(te) != n_total or (tr | va | te) != set(range(n_total)):
        raise AssertionError("split leakage: rows lost or duplicated")


def run_protocol(d: Dataset, cfg: EvalConfig, cache: MICache | None = None,
                 threads: int = 1) -> EvalReport:
    """Run the full protocol cfg.runs times and aggregate accuracies.

    Per run, the split seed and the estimator jitter seed are derived from
    the master seed and the run index.  Selection and the unique-relevance
    profile see the training split only; the validation split drives the
    prefix-size and neighbor-count choices; the test split is touched once.
    """
    accs, chosen_ns, per_run = [], [], []
    for r in range(cfg.runs):
        split_seed = derive_seed(cfg.master_seed, r, "split")
        jitter_seed = derive_seed(cfg.master_seed, r, "jitter")
        try:
            train, val, test = split_dataset(d, replace(cfg.split, seed=split_seed))
            _assert_no_leakage(train, val, test, d.n_samples)

            est = replace(cfg.score_config.estimator, jitter_seed=jitter_seed)
            budget = cfg.k_budget or min(train.n_features, train.n_samples - 1)
            score_cfg = replace(cfg.score_config, estimator=est, budget=budget)
            profile = None
            if score_cfg.beta > 0:
                profile = compute_profile(train, score_cfg, threads=threads)
            trace = select(train, score_cfg, profile=profile, cache=cache, threads=threads)

            curve, best_ks = validation_curve(train, val, trace, budget,
                                              cfg.knn_grid, cfg.knn_smoothing)
            chosen_n = int(np.argmax(curve)) + 1  # ties resolve to the smallest prefix
            knn_k = best_ks[chosen_n - 1]

            keep = list(trace.order[:chosen_n])
            kinds = tuple(train.kinds[j] for j in keep)
            test_acc = knn_accuracy(train.features[:, keep], train.label, train.n_classes,
                                    kinds, test.features[:, keep], test.label,
                                    knn_k, cfg.knn_smoothing)
        except ValueError as e:
            raise ValueError(f"run {r} (split seed {split_seed}) failed: {e}") from e
        accs.append(test_acc * 100.0)
        chosen_ns.append(chosen_n)
        per_run.append({
            "run": r,
            "seed": split_seed,
            "chosen_n": chosen_n,
            "knn_k": knn_k,
            "test_acc": test_acc * 100.0,
            "val_curve": [float(v) * 100.0 for v in curve],
        })
    accs_arr = np.array(accs)
    return EvalReport(mean_acc=float(accs_arr.mean()),
                      std_acc=float(accs_arr.std()),
                      mean_n_features=float(np.mean(chosen_ns)),
                      per_run=per_run)
