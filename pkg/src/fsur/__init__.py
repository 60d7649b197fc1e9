"""Mutual-information feature selection with unique-relevance boosting.

The package provides exact plug-in and k-NN mutual-information estimation,
per-feature unique-relevance profiles, five greedy MI scoring criteria with
an optional unique-relevance boost, a redundancy audit of selected subsets,
and a split/grid-search evaluation protocol around a built-in KNN classifier.
"""

__version__ = "0.1.0"

from .data import (
    Dataset,
    FeatureKind,
    SplitSpec,
    as_subset,
    infer_kinds,
    load_csv,
    save_csv,
    split_dataset,
    stratified_kfold,
    synth_duplicate,
    synth_gaussian,
    synth_xor,
)
from .estimators import (
    EstimatorConfig,
    MIValue,
    cond_mi,
    entropy_knn,
    entropy_plugin,
    joint_mi,
    mi_ksg,
    mi_mixed,
    mi_plugin,
)

__all__ = [
    "Dataset", "FeatureKind", "SplitSpec", "as_subset", "infer_kinds",
    "load_csv", "save_csv", "split_dataset", "stratified_kfold",
    "synth_duplicate", "synth_gaussian", "synth_xor",
    "EstimatorConfig", "MIValue", "cond_mi", "entropy_knn", "entropy_plugin",
    "joint_mi", "mi_ksg", "mi_mixed", "mi_plugin",
    "__version__",
]
