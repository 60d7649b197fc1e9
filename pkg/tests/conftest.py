"""Shared helpers: enumerated-joint dataset builders and closed-form oracles.

The oracles here compute information quantities straight from probability
tables (or by exhaustive enumeration) and are kept independent of the
library's estimator code paths on purpose.
"""

import itertools
import math

import numpy as np
import pytest

from fsur.data import Dataset, FeatureKind


def expand_counts_to_dataset(cells: np.ndarray, counts: np.ndarray, n_label_states: int,
                             name: str = "enumerated") -> Dataset:
    """Materialize an enumerated joint as a dataset.

    cells  : (n_cells, M+1) integer table, label in the last column.
    counts : repetitions per cell; the empirical joint of the result equals
             counts / counts.sum() exactly.
    """
    rows = np.repeat(cells, counts, axis=0)
    features = rows[:, :-1].astype(np.float64)
    label = rows[:, -1].astype(np.int64)
    m = features.shape[1]
    return Dataset(
        features=features,
        kinds=tuple([FeatureKind.DISCRETE] * m),
        label=label,
        names=tuple(f"f{j}" for j in range(m)),
        name=name,
    )


def random_enumerated_dataset(rng: np.random.Generator, max_features: int = 4,
                              max_states: int = 3, max_count: int = 4) -> Dataset:
    """A random discrete dataset that is a full enumeration of a random joint
    with rational probabilities (integer cell counts)."""
    m = int(rng.integers(2, max_features + 1))
    states = [int(rng.integers(2, max_states + 1)) for _ in range(m)]
    n_label = int(rng.integers(2, 3 + 1))
    cells = np.array(list(itertools.product(*[range(s) for s in states], range(n_label))),
                     dtype=np.int64)
    counts = rng.integers(0, max_count + 1, size=cells.shape[0])
    # guarantee every label state appears and at least two cells are populated
    for lab in range(n_label):
        block = np.flatnonzero(cells[:, -1] == lab)
        if counts[block].sum() == 0:
            counts[rng.choice(block)] = 1
    keep = counts > 0
    return expand_counts_to_dataset(cells[keep], counts[keep], n_label)


def table_entropy(p: np.ndarray) -> float:
    """-sum p ln p from a probability array, 0 ln 0 = 0."""
    p = np.asarray(p, dtype=np.float64).ravel()
    return -math.fsum(float(v) * math.log(v) for v in p if v > 0)


def table_mi(joint: np.ndarray) -> float:
    """Closed-form sum p ln(p / (p_x p_y)) from a 2-D joint probability table."""
    joint = np.asarray(joint, dtype=np.float64)
    px = joint.sum(axis=1)
    py = joint.sum(axis=0)
    total = 0.0
    terms = []
    for i in range(joint.shape[0]):
        for j in range(joint.shape[1]):
            p = joint[i, j]
            if p > 0:
                terms.append(p * math.log(p / (px[i] * py[j])))
    total = math.fsum(terms)
    return total


def empirical_joint_table(x_rows: np.ndarray, y_rows: np.ndarray) -> np.ndarray:
    """Empirical 2-D joint over distinct x-row and y-row patterns."""
    x_rows = np.atleast_2d(x_rows.T).T if x_rows.ndim == 1 else x_rows
    y_rows = np.atleast_2d(y_rows.T).T if y_rows.ndim == 1 else y_rows
    _, xi = np.unique(x_rows, axis=0, return_inverse=True)
    _, yi = np.unique(y_rows, axis=0, return_inverse=True)
    n_x, n_y = xi.max() + 1, yi.max() + 1
    table = np.zeros((n_x, n_y))
    for a, b in zip(xi, yi):
        table[a, b] += 1
    return table / len(xi)


def dataset_joint_mi_oracle(d: Dataset, indices) -> float:
    """MI between a feature subset and the label via the closed-form table sum."""
    sub = d.features[:, list(indices)].astype(np.int64) if indices else np.zeros((d.n_samples, 0), dtype=np.int64)
    if sub.shape[1] == 0:
        return 0.0
    return table_mi(empirical_joint_table(sub, d.label[:, None]))


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
