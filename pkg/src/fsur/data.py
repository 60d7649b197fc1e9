"""Dataset container, CSV round trip, stratified splitting, and synthetic generators."""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np


class FeatureKind(str, Enum):
    """Storage type of a feature column.

    DISCRETE columns hold integer-coded category values; CONTINUOUS columns
    hold finite reals.
    """

    DISCRETE = "discrete"
    CONTINUOUS = "continuous"


# An ordered feature subset: distinct column indices, order = selection order.
Indices = tuple[int, ...]


def as_subset(indices, n_features: int, allow_empty: bool = False) -> Indices:
    """Validate an ordered feature subset: in range, no duplicates."""
    idx = tuple(int(i) for i in indices)
    if not idx and not allow_empty:
        raise ValueError("feature subset must not be empty")
    for i in idx:
        if not 0 <= i < n_features:
            raise ValueError(f"feature index {i} out of range [0, {n_features})")
    if len(set(idx)) != len(idx):
        raise ValueError(f"duplicate feature indices in subset {idx}")
    return idx


@dataclass
class Dataset:
    """An immutable labelled feature matrix.

    features : (N, M) float64 matrix, one row per sample.
    kinds    : per-column FeatureKind.
    label    : (N,) int64 class ids, exactly the values 0..C-1 with C >= 2.
    names    : unique per-column identifiers.
    source_rows : row indices into a parent dataset (set by split_dataset),
        used for leakage checks; None for a dataset built from scratch.
    """

    features: np.ndarray
    kinds: tuple[FeatureKind, ...]
    label: np.ndarray
    names: tuple[str, ...]
    name: str = "dataset"
    label_name: str = "label"
    source_rows: np.ndarray | None = None
    _hash: str | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        feats = np.ascontiguousarray(np.asarray(self.features, dtype=np.float64))
        if feats.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        n, m = feats.shape
        if n < 1 or m < 1:
            raise ValueError("dataset needs at least one sample and one feature")
        if not np.all(np.isfinite(feats)):
            raise ValueError("features contain NaN or Inf")
        label = np.ascontiguousarray(np.asarray(self.label, dtype=np.int64))
        if label.shape != (n,):
            raise ValueError("label length must match the number of samples")
        classes = np.unique(label)
        if classes.size < 2:
            raise ValueError("single-class label: need at least 2 classes")
        if classes[0] != 0 or classes[-1] != classes.size - 1:
            raise ValueError("labels must be contiguous integers 0..C-1")
        kinds = tuple(FeatureKind(k) for k in self.kinds)
        if len(kinds) != m:
            raise ValueError("kinds length must match the number of features")
        names = tuple(str(s) for s in self.names)
        if len(names) != m:
            raise ValueError("names length must match the number of features")
        if len(set(names)) != m:
            raise ValueError("feature names must be unique")
        for j, kind in enumerate(kinds):
            if kind is FeatureKind.DISCRETE and not _is_integral(feats[:, j]):
                raise ValueError(f"column {names[j]!r} tagged discrete but holds non-integral values")
        feats.flags.writeable = False
        label.flags.writeable = False
        self.features = feats
        self.label = label
        self.kinds = kinds
        self.names = names
        if self.source_rows is not None:
            rows = np.asarray(self.source_rows, dtype=np.int64)
            rows.flags.writeable = False
            self.source_rows = rows

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return int(self.label.max()) + 1

    @property
    def content_hash(self) -> str:
        """Hex digest of the numeric content (features, label, kinds)."""
        if self._hash is None:
            h = hashlib.sha256()
            h.update(str(self.features.shape).encode())
            h.update(self.features.tobytes())
            h.update(self.label.tobytes())
            h.update(",".join(k.value for k in self.kinds).encode())
            self._hash = h.hexdigest()
        return self._hash

    def columns(self, indices) -> np.ndarray:
        """Feature columns for an ordered subset, as an (N, len(indices)) copy."""
        idx = as_subset(indices, self.n_features)
        return self.features[:, list(idx)].copy()

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"no feature named {name!r}") from None


def _is_integral(col: np.ndarray) -> bool:
    return bool(np.all(col == np.floor(col)))


def infer_kinds(features: np.ndarray) -> tuple[FeatureKind, ...]:
    """Tag each column discrete or continuous.

    A column is discrete iff every value is integral and the number of
    distinct values is at most max(20, floor(sqrt(N))).
    """
    feats = np.asarray(features, dtype=np.float64)
    n = feats.shape[0]
    limit = max(20, math.isqrt(n))
    kinds = []
    for j in range(feats.shape[1]):
        col = feats[:, j]
        if _is_integral(col) and np.unique(col).size <= limit:
            kinds.append(FeatureKind.DISCRETE)
        else:
            kinds.append(FeatureKind.CONTINUOUS)
    return tuple(kinds)


def load_csv(path, label_column: str, kind_overrides: dict | None = None,
             name: str | None = None) -> Dataset:
    """Load a dataset from a headered CSV of numbers.

    The label column is removed from the features and re-coded to contiguous
    integers 0..C-1 by sorted original value.  Feature kinds come from
    infer_kinds unless overridden by name in kind_overrides.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file, expected a header row") from None
        header = [h.strip() for h in header]
        if len(set(header)) != len(header):
            dupes = sorted({h for h in header if header.count(h) > 1})
            raise ValueError(f"{path}: duplicate header names {dupes}")
        if label_column not in header:
            raise ValueError(f"{path}: label column {label_column!r} not in header {header}")
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}: line {line_no} has {len(row)} cells, expected {len(header)}")
            parsed = []
            for col_name, cell in zip(header, row):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise ValueError(
                        f"{path}: non-numeric cell at line {line_no}, column {col_name!r}: {cell!r}"
                    ) from None
            rows.append(parsed)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    table = np.asarray(rows, dtype=np.float64)
    label_idx = header.index(label_column)
    raw_label = table[:, label_idx]
    feature_cols = [j for j in range(len(header)) if j != label_idx]
    features = table[:, feature_cols]
    names = tuple(header[j] for j in feature_cols)

    classes = np.unique(raw_label)
    if classes.size < 2:
        raise ValueError(f"{path}: single-class label ({classes[0]!r} only)")
    label = np.searchsorted(classes, raw_label).astype(np.int64)

    kinds = list(infer_kinds(features))
    for col_name, kind in (kind_overrides or {}).items():
        if col_name not in names:
            raise ValueError(f"kind override for unknown column {col_name!r}")
        kinds[names.index(col_name)] = FeatureKind(kind)

    return Dataset(features=features, kinds=tuple(kinds), label=label, names=names,
                   name=name or path.stem, label_name=label_column)


def save_csv(d: Dataset, path) -> None:
    """Write a dataset back to CSV, label as the last column.

    Floats are written with shortest round-trip repr so a reload is bit-equal.
    """
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(d.names) + [d.label_name])
        for i in range(d.n_samples):
            row = [repr(float(v)) for v in d.features[i]]
            row.append(str(int(d.label[i])))
            writer.writerow(row)


@dataclass(frozen=True)
class SplitSpec:
    """Fractions for a train/validation/test split plus the shuffle seed."""

    train_frac: float = 0.6
    val_frac: float = 0.2
    test_frac: float = 0.2
    seed: int = 0

    def __post_init__(self):
        fracs = (self.train_frac, self.val_frac, self.test_frac)
        if any(f <= 0 for f in fracs):
            raise ValueError("split fractions must be positive")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise ValueError(f"split fractions must sum to 1, got {sum(fracs)}")


def _controlled_rounding(quotas: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Round a (classes x splits) quota table to integers.

    Row sums stay exact (they are integers already) and column sums hit the
    requested targets.  Cells stay at floor or ceil of their quota, with one
    exception: the remainder-to-train sizing rule can make the train target
    exceed every floor/ceil table by one unit, in which case a single train
    cell is allowed to reach ceil + 1 (class proportion off by < 2 samples).
    """
    n_rows, n_cols = quotas.shape
    floors = np.floor(quotas).astype(np.int64)
    alloc = floors.copy()
    frac = quotas - floors
    for c in range(n_rows):
        short = int(round(quotas[c].sum())) - int(alloc[c].sum())
        order = sorted(range(n_cols), key=lambda s: (-frac[c, s], s))
        for s in order[:short]:
            alloc[c, s] += 1

    def over():
        return [s for s in range(n_cols) if alloc[:, s].sum() > targets[s]]

    def under():
        return [s for s in range(n_cols) if alloc[:, s].sum() < targets[s]]

    guard = 4 * n_rows * n_cols + 8
    while over():
        guard -= 1
        if guard < 0:
            raise ValueError("class too small to stratify: no feasible allocation")
        a = over()[0]
        moved = False
        for b in under():
            for c in range(n_rows):
                if alloc[c, a] > floors[c, a] and frac[c, b] > 0 and alloc[c, b] == floors[c, b]:
                    alloc[c, a] -= 1
                    alloc[c, b] += 1
                    moved = True
                    break
            if moved:
                break
        if not moved:
            # route one unit through an intermediate column
            b = under()[0]
            for mid in range(n_cols):
                if mid in (a, b):
                    continue
                step1 = next((c for c in range(n_rows)
                              if alloc[c, a] > floors[c, a] and frac[c, mid] > 0
                              and alloc[c, mid] == floors[c, mid]), None)
                step2 = next((c for c in range(n_rows)
                              if alloc[c, mid] > floors[c, mid] and frac[c, b] > 0
                              and alloc[c, b] == floors[c, b]), None)
                if step1 is not None and step2 is not None:
                    alloc[step1, a] -= 1
                    alloc[step1, mid] += 1
                    alloc[step2, mid] -= 1
                    alloc[step2, b] += 1
                    moved = True
                    break
        if not moved and 0 in under():
            # The remainder-to-train sizing rule can demand one unit more
            # than any floor/ceil table offers; let a train cell absorb it.
            donors = [c for c in range(n_rows) if alloc[c, a] > floors[c, a]]
            if donors:
                c = max(donors, key=lambda r: (frac[r, 0], -r))
                alloc[c, a] -= 1
                alloc[c, 0] += 1
                moved = True
        if not moved:
            raise ValueError("class too small to stratify: no feasible allocation")
    return alloc


def split_dataset(d: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset, Dataset]:
    """Stratified shuffle split into train/validation/test.

    Overall sizes are floor(N * val_frac) and floor(N * test_frac) with the
    remainder going to train; per class the same largest-remainder rule keeps
    proportions within one sample.  Deterministic given spec.seed.
    """
    n = d.n_samples
    n_val = int(math.floor(n * spec.val_frac))
    n_test = int(math.floor(n * spec.test_frac))
    n_train = n - n_val - n_test
    if min(n_train, n_val, n_test) < 1:
        raise ValueError(f"dataset of {n} samples too small for fractions {spec}")

    rng = np.random.default_rng(spec.seed)
    classes = np.arange(d.n_classes)
    counts = np.bincount(d.label, minlength=d.n_classes)
    if np.any(counts == 0):
        raise ValueError("class too small to stratify: empty class")

    quotas = counts[:, None] * np.array([spec.train_frac, spec.val_frac, spec.test_frac])
    alloc = _controlled_rounding(quotas, np.array([n_train, n_val, n_test]))

    val_rows, test_rows, train_rows = [], [], []
    for c in classes:
        rows_c = np.flatnonzero(d.label == c)
        rows_c = rows_c[rng.permutation(rows_c.size)]
        k_v, k_t = int(alloc[c, 1]), int(alloc[c, 2])
        val_rows.append(rows_c[:k_v])
        test_rows.append(rows_c[k_v:k_v + k_t])
        train_rows.append(rows_c[k_v + k_t:])

    def take(parts, tag):
        rows = np.sort(np.concatenate(parts))
        sub = Dataset(features=d.features[rows], kinds=d.kinds, label=d.label[rows],
                      names=d.names, name=f"{d.name}:{tag}", label_name=d.label_name,
                      source_rows=rows)
        if np.unique(sub.label).size < 2:
            raise ValueError(f"class too small to stratify: {tag} split has a single class")
        return sub

    return take(train_rows, "train"), take(val_rows, "val"), take(test_rows, "test")


def stratified_kfold(label: np.ndarray, folds: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Stratified k-fold assignments as (train_idx, held_out_idx) pairs."""
    if folds < 2:
        raise ValueError("folds must be >= 2")
    label = np.asarray(label)
    counts = np.bincount(label)
    small = np.flatnonzero(counts < folds)
    if small.size:
        raise ValueError(f"class {int(small[0])} has {int(counts[small[0]])} members, fewer than {folds} folds")
    rng = np.random.default_rng(seed)
    fold_of = np.empty(label.shape[0], dtype=np.int64)
    for c in range(counts.size):
        rows_c = np.flatnonzero(label == c)
        rows_c = rows_c[rng.permutation(rows_c.size)]
        fold_of[rows_c] = np.arange(rows_c.size) % folds
    out = []
    for f in range(folds):
        held = np.flatnonzero(fold_of == f)
        train = np.flatnonzero(fold_of != f)
        if np.unique(label[train]).size < 2:
            raise ValueError(f"fold {f}: training part has a single class")
        out.append((train, held))
    return out


def synth_xor(n_noise: int, n_per_cell: int, seed: int) -> Dataset:
    """Two uniform binary inputs with an XOR label plus independent noise bits.

    Each of the four (x1, x2) cells appears exactly n_per_cell times, so the
    empirical joint is the exact product table: each input alone carries no
    label information while the pair determines the label.
    """
    if n_per_cell < 1:
        raise ValueError("n_per_cell must be >= 1")
    base = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=np.float64)
    x12 = np.repeat(base, n_per_cell, axis=0)
    y = (x12[:, 0].astype(np.int64) ^ x12[:, 1].astype(np.int64))
    rng = np.random.default_rng(seed)
    cols = [x12]
    names = ["x1", "x2"]
    if n_noise > 0:
        cols.append(rng.integers(0, 2, size=(x12.shape[0], n_noise)).astype(np.float64))
        names += [f"noise{i + 1}" for i in range(n_noise)]
    features = np.column_stack(cols)
    kinds = tuple([FeatureKind.DISCRETE] * features.shape[1])
    return Dataset(features=features, kinds=kinds, label=y, names=tuple(names), name="xor")


def synth_duplicate(n_copies: int, n_rows: int, seed: int) -> Dataset:
    """A balanced binary label with every feature an exact copy of it.

    Any single copy determines the label, so no copy carries information the
    others lack.
    """
    if n_copies < 2:
        raise ValueError("n_copies must be >= 2")
    if n_rows < 2 or n_rows % 2:
        raise ValueError("n_rows must be even and >= 2")
    rng = np.random.default_rng(seed)
    y = np.repeat(np.array([0, 1], dtype=np.int64), n_rows // 2)
    y = y[rng.permutation(n_rows)]
    features = np.tile(y.astype(np.float64)[:, None], (1, n_copies))
    kinds = tuple([FeatureKind.DISCRETE] * n_copies)
    names = tuple(f"x{i + 1}" for i in range(n_copies))
    return Dataset(features=features, kinds=kinds, label=y, names=names, name="duplicate")


def synth_gaussian(n_informative: int, n_redundant: int, n_noise: int, n_rows: int,
                   class_sep: float = 2.0, seed: int = 0) -> Dataset:
    """Continuous two-class blobs with built-in redundancy.

    Informative columns get a class-dependent mean shift of +/- class_sep/2.
    Redundant columns are noisy nonnegative mixes of the informative block, so
    they correlate with the label without adding information of their own.
    Noise columns are independent standard normals.
    """
    if n_informative < 1:
        raise ValueError("need at least one informative feature")
    if n_rows < 4 or n_rows % 2:
        raise ValueError("n_rows must be even and >= 4")
    rng = np.random.default_rng(seed)
    y = np.repeat(np.array([0, 1], dtype=np.int64), n_rows // 2)
    y = y[rng.permutation(n_rows)]
    shift = (y.astype(np.float64) - 0.5) * class_sep
    informative = rng.standard_normal((n_rows, n_informative)) + shift[:, None]
    blocks = [informative]
    names = [f"inf{i + 1}" for i in range(n_informative)]
    if n_redundant > 0:
        mix = rng.uniform(0.5, 1.5, size=(n_informative, n_redundant))
        mix /= mix.sum(axis=0)
        redundant = informative @ mix + 0.05 * rng.standard_normal((n_rows, n_redundant))
        blocks.append(redundant)
        names += [f"red{i + 1}" for i in range(n_redundant)]
    if n_noise > 0:
        blocks.append(rng.standard_normal((n_rows, n_noise)))
        names += [f"noise{i + 1}" for i in range(n_noise)]
    features = np.column_stack(blocks)
    kinds = tuple([FeatureKind.CONTINUOUS] * features.shape[1])
    return Dataset(features=features, kinds=kinds, label=y, names=tuple(names), name="gaussian")
