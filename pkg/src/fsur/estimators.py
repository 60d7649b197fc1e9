"""Entropy and mutual-information estimators, all in nats.

Discrete data uses exact plug-in formulas over empirical joint frequencies.
Continuous data uses k-nearest-neighbor estimators with digamma corrections
and Chebyshev (max-norm) distances: the classic two-continuous-blocks
estimator, a discrete-target variant for feature-block-vs-label queries, and
a Kozachenko-Leonenko differential entropy.

For modest sample counts the neighbor searches run on dense pairwise
distance matrices (exact, vectorized, and cheap to reuse across feature
subsets); larger inputs fall back to KD-trees.  Both paths are deterministic
for a fixed EstimatorConfig: tie-breaking noise is generated from
jitter_seed xor the column id, never from global randomness.
"""

from __future__ import annotations

import hashlib
import math
from collections import OrderedDict
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import digamma
from sklearn.neighbors import KDTree

from .data import Dataset, FeatureKind, as_subset

# Above this many samples the dense-matrix path would need too much memory,
# so neighbor queries go through KD-trees instead.
BRUTE_MAX_N = 2048

_WORKSPACE_BUDGET_BYTES = 512 * 2**20
_MAX_WORKSPACES = 8


@dataclass(frozen=True)
class EstimatorConfig:
    """Knobs of MI estimation.

    family : 'plugin', 'ksg', or 'auto'.  Auto resolves to the plug-in
        estimator iff every variable involved is discrete, otherwise to the
        neighbor-based path.
    ksg_k : neighbor count for the k-NN estimators.
    standardize : z-score continuous columns before distance computations.
    jitter_scale : tie-breaking noise magnitude, relative to column range.
    jitter_seed : seed for the deterministic tie-breaking noise.
    """

    family: str = "auto"
    ksg_k: int = 3
    standardize: bool = True
    jitter_scale: float = 1e-10
    jitter_seed: int = 0

    def __post_init__(self):
        if self.family not in ("plugin", "ksg", "auto"):
            raise ValueError(f"unknown estimator family {self.family!r}")
        if self.ksg_k < 1:
            raise ValueError("ksg_k must be >= 1")
        if self.jitter_scale < 0:
            raise ValueError("jitter_scale must be >= 0")

    def key(self) -> str:
        payload = f"{self.family}|{self.ksg_k}|{self.standardize}|{self.jitter_scale!r}|{self.jitter_seed}"
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class MIValue:
    """A mutual-information estimate in nats plus how it was obtained."""

    value: float
    estimator_used: str
    n_samples: int


# ---------------------------------------------------------------------------
# Plug-in estimators (exact on discrete data)
# ---------------------------------------------------------------------------

def _as_discrete_matrix(x) -> np.ndarray:
    cols = np.asarray(x, dtype=np.float64)
    if cols.ndim == 1:
        cols = cols[:, None]
    if cols.ndim != 2:
        raise ValueError("expected a column vector or matrix")
    if not np.all(np.isfinite(cols)):
        raise ValueError("discrete columns must be finite")
    if not np.all(cols == np.floor(cols)):
        raise ValueError("continuous column supplied to a plug-in estimator")
    return np.rint(cols).astype(np.int64)


def entropy_plugin(x) -> float:
    """Joint empirical entropy -sum p ln p of one or more discrete columns.

    Uses an exactly rounded sum so that cell-count multisets map to bitwise
    identical entropies regardless of cell order.
    """
    cols = _as_discrete_matrix(x)
    n = cols.shape[0]
    if cols.shape[1] == 0 or n == 0:
        return 0.0
    _, counts = np.unique(cols, axis=0, return_counts=True)
    if counts.size == 1:
        return 0.0
    # H = ln N - (1/N) * sum c ln c
    return math.log(n) - math.fsum(float(c) * math.log(c) for c in counts if c > 1) / n


def mi_plugin(x, y) -> MIValue:
    """Plug-in mutual information H(x) + H(y) - H(x, y) between discrete blocks."""
    xm = _as_discrete_matrix(x)
    ym = _as_discrete_matrix(y)
    if xm.shape[0] != ym.shape[0]:
        raise ValueError("x and y must have the same number of rows")
    value = entropy_plugin(xm) + entropy_plugin(ym) - entropy_plugin(np.column_stack([xm, ym]))
    if value < 0.0:
        value = 0.0
    return MIValue(value=value, estimator_used="plugin", n_samples=xm.shape[0])


# ---------------------------------------------------------------------------
# Column preparation for neighbor-based estimators
# ---------------------------------------------------------------------------

def _jitter_rng(jitter_seed: int, col_id: int) -> np.random.Generator:
    mixed = (np.uint64(jitter_seed & 0xFFFFFFFFFFFFFFFF) ^ np.uint64(col_id & 0xFFFFFFFFFFFFFFFF))
    return np.random.default_rng(int(mixed))

def prepare_column(col: np.ndarray, col_id: int, cfg: EstimatorConfig,
                   standardize: bool | None = None) -> np.ndarray:
    """Jitter then optionally z-score one column for distance computations.

    The tie-breaking noise is uniform with magnitude jitter_scale times the
    raw column range, drawn from a generator seeded by jitter_seed xor the
    column id, so identical configs always see identical coordinates.
    """
    col = np.asarray(col, dtype=np.float64)
    span = float(col.max() - col.min())
    out = col.copy()
    if cfg.jitter_scale > 0 and span > 0:
        rng = _jitter_rng(cfg.jitter_seed, col_id)
        out = out + cfg.jitter_scale * span * rng.random(col.shape[0])
    if standardize is None:
        standardize = cfg.standardize
    if standardize:
        sd = float(out.std())
        if sd == 0.0:
            raise ValueError(f"zero-variance column (id {col_id}) after jitter")
        out = (out - float(out.mean())) / sd
    elif float(out.std()) == 0.0:
        raise ValueError(f"zero-variance column (id {col_id}) after jitter")
    return out


class _Workspace:
    """Per-(dataset, config) store of prepared columns and pairwise
    per-column Chebyshev distance components.

    Dense |x_i - x_j| matrices are memoized under a byte budget so that the
    many overlapping feature subsets visited by selection and auditing reuse
    them; evictions only cost recomputation, never change values.
    """

    def __init__(self, n: int, budget_bytes: int = _WORKSPACE_BUDGET_BYTES):
        self.n = n
        self.budget = budget_bytes
        self.cols: dict[int, np.ndarray] = {}
        self.deltas: OrderedDict[int, np.ndarray] = OrderedDict()
        self.bytes_used = 0

    def column(self, col_id: int, raw: np.ndarray, cfg: EstimatorConfig) -> np.ndarray:
        if col_id not in self.cols:
            self.cols[col_id] = prepare_column(raw, col_id, cfg)
        return self.cols[col_id]

    def delta(self, col_id: int, raw: np.ndarray, cfg: EstimatorConfig) -> np.ndarray:
        hit = self.deltas.get(col_id)
        if hit is not None:
            self.deltas.move_to_end(col_id)
            return hit
        col = self.column(col_id, raw, cfg)
        mat = np.abs(col[:, None] - col[None, :])
        self.deltas[col_id] = mat
        self.bytes_used += mat.nbytes
        while self.bytes_used > self.budget and len(self.deltas) > 1:
            _, evicted = self.deltas.popitem(last=False)
            self.bytes_used -= evicted.nbytes
        return mat


_workspaces: OrderedDict[tuple[str, str], _Workspace] = OrderedDict()


def _workspace_for(d: Dataset, cfg: EstimatorConfig) -> _Workspace:
    key = (d.content_hash, cfg.key())
    ws = _workspaces.get(key)
    if ws is None:
        ws = _Workspace(d.n_samples)
        _workspaces[key] = ws
        while len(_workspaces) > _MAX_WORKSPACES:
            _workspaces.popitem(last=False)
    else:
        _workspaces.move_to_end(key)
    return ws


def _chebyshev_matrix(cols: np.ndarray) -> np.ndarray:
    """Dense pairwise max-norm distances for a prepared (N, d) block."""
    n, d = cols.shape
    out = np.abs(cols[:, 0][:, None] - cols[:, 0][None, :])
    for j in range(1, d):
        np.maximum(out, np.abs(cols[:, j][:, None] - cols[:, j][None, :]), out=out)
    return out


def _kth_neighbor_distance(dmat: np.ndarray, k: int) -> np.ndarray:
    """Distance to the k-th nearest neighbor per row, self excluded.

    Row i of dmat contains d(i, i) = 0, so after a partial sort the k-th
    neighbor sits at index k.
    """
    return np.partition(dmat, k, axis=1)[:, k]


# ---------------------------------------------------------------------------
# Continuous-continuous mutual information
# ---------------------------------------------------------------------------

def _as_float_matrix(x) -> np.ndarray:
    cols = np.asarray(x, dtype=np.float64)
    if cols.ndim == 1:
        cols = cols[:, None]
    if cols.ndim != 2 or cols.shape[1] == 0:
        raise ValueError("expected a nonempty column vector or matrix")
    if not np.all(np.isfinite(cols)):
        raise ValueError("columns must be finite")
    return cols


def mi_ksg(x, y, cfg: EstimatorConfig, x_ids=None, y_ids=None) -> MIValue:
    """Neighbor-based MI between two real-valued column blocks.

    The joint-space distance to the ksg_k-th neighbor sets a per-sample
    radius; points strictly inside that radius are counted in each marginal
    and fed through digamma corrections:

        psi(k) + psi(N) - mean(psi(c_x) + psi(c_y))

    where c_* counts the sample itself plus its strict marginal neighbors.
    """
    xm = _as_float_matrix(x)
    ym = _as_float_matrix(y)
    n = xm.shape[0]
    if ym.shape[0] != n:
        raise ValueError("x and y must have the same number of rows")
    k = cfg.ksg_k
    if n <= k:
        raise ValueError(f"need more than ksg_k={k} samples, got {n}")
    if x_ids is None:
        x_ids = range(xm.shape[1])
    if y_ids is None:
        y_ids = range(xm.shape[1], xm.shape[1] + ym.shape[1])
    xp = np.column_stack([prepare_column(xm[:, j], cid, cfg) for j, cid in enumerate(x_ids)])
    yp = np.column_stack([prepare_column(ym[:, j], cid, cfg) for j, cid in enumerate(y_ids)])

    if n <= BRUTE_MAX_N:
        dx = _chebyshev_matrix(xp)
        dy = _chebyshev_matrix(yp)
        eps = _kth_neighbor_distance(np.maximum(dx, dy), k)
        cx = np.sum(dx < eps[:, None], axis=1)
        cy = np.sum(dy < eps[:, None], axis=1)
    else:
        joint = np.column_stack([xp, yp])
        eps = KDTree(joint, metric="chebyshev").query(joint, k=k + 1)[0][:, k]
        shrunk = np.nextafter(eps, 0)
        cx = KDTree(xp, metric="chebyshev").query_radius(xp, shrunk, count_only=True)
        cy = KDTree(yp, metric="chebyshev").query_radius(yp, shrunk, count_only=True)
    value = float(digamma(k) + digamma(n) - np.mean(digamma(cx) + digamma(cy)))
    return MIValue(value=value, estimator_used="ksg", n_samples=n)


# ---------------------------------------------------------------------------
# Continuous-features / discrete-label mutual information
# ---------------------------------------------------------------------------

def mi_mixed(x, y, cfg: EstimatorConfig, x_ids=None, workspace: _Workspace | None = None,
             raw_cols=None) -> MIValue:
    """Neighbor-based MI between a real feature block and a discrete label.

    For each sample the ksg_k-th neighbor among same-class samples sets a
    radius; m_i counts the sample plus all strictly closer samples of any
    class:

        psi(N) + psi(k) - mean(psi(n_class_i)) - mean(psi(m_i))
    """
    label = np.asarray(y)
    if label.ndim != 1:
        raise ValueError("label must be a vector")
    label = label.astype(np.int64)
    n = label.shape[0]
    k = cfg.ksg_k
    counts = np.bincount(label)
    if counts.min() <= k:
        small = int(np.argmin(counts))
        raise ValueError(f"class {small} has {int(counts.min())} samples, need more than ksg_k={k}")

    if workspace is not None:
        ids = list(x_ids)
        deltas = [workspace.delta(cid, raw_cols[:, pos], cfg) for pos, cid in enumerate(ids)]
        dx = deltas[0].copy()
        for mat in deltas[1:]:
            np.maximum(dx, mat, out=dx)
        xp = None
    else:
        xm = _as_float_matrix(x)
        if xm.shape[0] != n:
            raise ValueError("x and y must have the same number of rows")
        if x_ids is None:
            x_ids = range(xm.shape[1])
        xp = np.column_stack([prepare_column(xm[:, j], cid, cfg) for j, cid in enumerate(x_ids)])
        dx = _chebyshev_matrix(xp) if n <= BRUTE_MAX_N else None

    if dx is not None:
        radius = np.empty(n, dtype=np.float64)
        for c in range(counts.size):
            mask = label == c
            sub = dx[np.ix_(mask, mask)]
            radius[mask] = _kth_neighbor_distance(sub, k)
        m = np.sum(dx < radius[:, None], axis=1)
    else:
        radius = np.empty(n, dtype=np.float64)
        for c in range(counts.size):
            mask = label == c
            pts = xp[mask]
            radius[mask] = KDTree(pts, metric="chebyshev").query(pts, k=k + 1)[0][:, k]
        m = KDTree(xp, metric="chebyshev").query_radius(xp, np.nextafter(radius, 0), count_only=True)
    value = float(digamma(n) + digamma(k) - np.mean(digamma(counts[label])) - np.mean(digamma(m)))
    return MIValue(value=value, estimator_used="ksg", n_samples=n)


def entropy_knn(x, cfg: EstimatorConfig, x_ids=None) -> float:
    """Kozachenko-Leonenko differential entropy of a real column block, nats.

    Computed on jittered raw coordinates (no z-scoring) so the value keeps
    the scale of the data; max-norm k-th neighbor distances with the 2^d
    ball-volume constant.
    """
    xm = _as_float_matrix(x)
    n, d = xm.shape
    k = cfg.ksg_k
    if n <= k:
        raise ValueError(f"need more than ksg_k={k} samples, got {n}")
    if x_ids is None:
        x_ids = range(d)
    xp = np.column_stack([prepare_column(xm[:, j], cid, cfg, standardize=False)
                          for j, cid in enumerate(x_ids)])
    if n <= BRUTE_MAX_N:
        eps = _kth_neighbor_distance(_chebyshev_matrix(xp), k)
    else:
        eps = KDTree(xp, metric="chebyshev").query(xp, k=k + 1)[0][:, k]
    return float(digamma(n) - digamma(k) + d * math.log(2) + d * np.mean(np.log(eps)))


# ---------------------------------------------------------------------------
# Dataset-level dispatch
# ---------------------------------------------------------------------------

def joint_mi(d: Dataset, s, cfg: EstimatorConfig) -> MIValue:
    """Mutual information between a feature subset and the label.

    All-discrete subsets under family 'auto' or 'plugin' use the exact
    plug-in path; anything else uses the discrete-label neighbor estimator
    with discrete feature columns cast to reals (jitter breaks the ties).
    The value does not depend on the order of indices in s.
    """
    idx = as_subset(s, d.n_features)
    canon = tuple(sorted(idx))
    all_discrete = all(d.kinds[i] is FeatureKind.DISCRETE for i in canon)
    if cfg.family == "plugin" and not all_discrete:
        raise ValueError("plugin estimator requires discrete features")
    block = d.features[:, list(canon)]
    if all_discrete and cfg.family in ("auto", "plugin"):
        return mi_plugin(block, d.label)
    ws = _workspace_for(d, cfg) if d.n_samples <= BRUTE_MAX_N else None
    if ws is not None:
        return mi_mixed(None, d.label, cfg, x_ids=canon, workspace=ws, raw_cols=block)
    return mi_mixed(block, d.label, cfg, x_ids=canon)


def cond_mi(d: Dataset, x, z, cfg: EstimatorConfig) -> float:
    """I(x; label | z) via the chain-rule difference of joint MI values.

    joint_mi over the empty set is zero by convention, so z may be empty.
    May come out slightly negative on the neighbor path; returned raw.
    """
    xi = as_subset(x, d.n_features)
    zi = as_subset(z, d.n_features, allow_empty=True)
    if set(xi) & set(zi):
        raise ValueError(f"x and z overlap: {sorted(set(xi) & set(zi))}")
    base = joint_mi(d, zi, cfg).value if zi else 0.0
    return joint_mi(d, tuple(xi) + tuple(zi), cfg).value - base
