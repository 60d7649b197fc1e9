"""Redundancy audit of a greedy selection run.

Runs selection over the full feature set, finds the step where the joint MI
with the label first saturates, splits the saturated prefix by unique
relevance, and exhaustively searches the zero-UR part for the largest
subset whose removal leaves the joint MI intact.  The redundancy rate is
the removable fraction of the saturated prefix.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace

from .cache import MICache
from .data import Dataset
from .estimators import EstimatorConfig
from .relevance import RelevanceProfile, ur_ksg
from .selection import ScoreConfig, ScoreState, SelectionTrace, select


@dataclass(frozen=True)
class AuditTolerances:
    """Operational tolerances for the audit.

    rel_tol : relative joint-MI threshold that counts as saturation
        (neighbor-estimate curves never plateau exactly).
    mi_tol : absolute MI drop treated as "no loss" in the removability
        search; None picks 0 for the exact plug-in path and 1e-3 nats for
        the neighbor path.
    ur_tol : unique relevance below this is treated as zero.
    max_exhaustive : hard cap on the zero-UR subset size; beyond it the
        2^n search refuses to run rather than silently approximating.
    """

    rel_tol: float = 1e-3
    mi_tol: float | None = None
    ur_tol: float = 1e-3
    max_exhaustive: int = 25


@dataclass
class RedundancyReport:
    s_sat: tuple[int, ...]
    s_ur: tuple[int, ...]
    s_zur: tuple[int, ...]
    s_cr: tuple[int, ...]
    s_red: tuple[int, ...]
    gamma: float
    sat_step: int
    tolerance_used: float
    full_mi: float
    joint_mi_curve: list[float]
    config: ScoreConfig

    def to_payload(self, names) -> dict:
        def tag(sub):
            return [{"index": int(i), "name": names[i]} for i in sub]

        return {
            "method": self.config.method,
            "beta": self.config.beta,
            "ur_source": self.config.ur_source,
            "sat_step": self.sat_step,
            "gamma": self.gamma,
            "tolerance_used": self.tolerance_used,
            "full_mi": self.full_mi,
            "s_sat": tag(self.s_sat),
            "s_ur": tag(self.s_ur),
            "s_zur": tag(self.s_zur),
            "s_cr": tag(self.s_cr),
            "s_red": tag(self.s_red),
            "joint_mi_curve": self.joint_mi_curve,
        }


def detect_saturation(trace: SelectionTrace, full_mi: float, rel_tol: float) -> int:
    """First step (1-based) whose joint MI reaches the full-set value within
    the relative tolerance."""
    threshold = full_mi - rel_tol * abs(full_mi)
    for t, v in enumerate(trace.joint_mi_curve, start=1):
        if v >= threshold:
            return t
    raise ValueError(
        f"joint-MI curve never reaches {threshold:.6g} (full MI {full_mi:.6g}) "
        f"within {len(trace.joint_mi_curve)} steps")


def partition_ur(d: Dataset, s_sat, profile: RelevanceProfile, ur_tol: float):
    """Split the saturated prefix into unique-relevance carriers and the
    rest, preserving selection order in both parts."""
    s_ur = tuple(i for i in s_sat if profile.ur_raw[i] > ur_tol)
    s_zur = tuple(i for i in s_sat if profile.ur_raw[i] <= ur_tol)
    return s_ur, s_zur


def find_sred(d: Dataset, s_ur, s_zur, cfg: EstimatorConfig, mi_tol: float,
              max_exhaustive: int = 25, cache: MICache | None = None):
    """Largest removable subset of the zero-UR features.

    Candidate removals are tried in decreasing size and, within a size, in
    increasing lexicographic order of feature indices; the first subset
    whose removal keeps the joint MI within mi_tol of the saturated value
    wins.  Returns (s_red, s_cr), both in the zero-UR order given.
    """
    if len(s_zur) > max_exhaustive:
        raise ValueError(
            f"exhaustive search infeasible: {len(s_zur)} zero-UR features exceed "
            f"the cap of {max_exhaustive} (2^{len(s_zur)} subsets)")
    state = ScoreState(d, cfg, cache)
    if not s_zur:
        return (), ()
    base = state.label_mi(tuple(s_ur) + tuple(s_zur))
    zur_sorted = sorted(s_zur)
    for size in range(len(zur_sorted), 0, -1):
        for removal in itertools.combinations(zur_sorted, size):
            keep = tuple(s_ur) + tuple(i for i in s_zur if i not in removal)
            kept_mi = state.label_mi(keep) if keep else 0.0
            if kept_mi >= base - mi_tol:
                s_red = tuple(i for i in s_zur if i in removal)
                s_cr = tuple(i for i in s_zur if i not in removal)
                return s_red, s_cr
    return (), tuple(s_zur)


def audit(d: Dataset, cfg: ScoreConfig, tolerances: AuditTolerances | None = None,
          cache: MICache | None = None, threads: int = 1) -> RedundancyReport:
    """Full redundancy audit: select everything, find saturation, partition
    by unique relevance, and search for removable features."""
    tol = tolerances or AuditTolerances()
    full_cfg = replace(cfg, budget=None)
    trace = select(d, full_cfg, cache=cache, threads=threads)

    state = ScoreState(d, cfg.estimator, cache)
    full_mi = state.label_mi(range(d.n_features))
    mi_tol = tol.mi_tol
    if mi_tol is None:
        all_discrete = all(k.value == "discrete" for k in d.kinds)
        exact = all_discrete and cfg.estimator.family in ("auto", "plugin")
        mi_tol = 0.0 if exact else 1e-3

    sat_step = detect_saturation(trace, full_mi, tol.rel_tol)
    s_sat = trace.order[:sat_step]

    profile = trace.ur_profile
    if profile is None or profile.ur_estimator != "ksg":
        profile = ur_ksg(d, cfg.estimator, threads=threads)
    s_ur, s_zur = partition_ur(d, s_sat, profile, tol.ur_tol)
    s_red, s_cr = find_sred(d, s_ur, s_zur, cfg.estimator, mi_tol,
                            max_exhaustive=tol.max_exhaustive, cache=cache)

    gamma = len(s_red) / len(s_sat)
    report = RedundancyReport(s_sat=s_sat, s_ur=s_ur, s_zur=s_zur, s_cr=s_cr,
                              s_red=s_red, gamma=gamma, sat_step=sat_step,
                              tolerance_used=mi_tol, full_mi=full_mi,
                              joint_mi_curve=list(trace.joint_mi_curve), config=cfg)
    _check_report(report, d, cfg.estimator, mi_tol, cache)
    return report


def _check_report(report: RedundancyReport, d: Dataset, est: EstimatorConfig,
                  mi_tol: float, cache: MICache | None) -> None:
    """Structural invariants, re-verified on every emitted report."""
    assert set(report.s_sat) == set(report.s_ur) | set(report.s_zur)
    assert not set(report.s_ur) & set(report.s_zur)
    assert set(report.s_zur) == set(report.s_cr) | set(report.s_red)
    assert not set(report.s_cr) & set(report.s_red)
    assert report.gamma == len(report.s_red) / len(report.s_sat)
    state = ScoreState(d, est, cache)
    kept = tuple(i for i in report.s_sat if i not in set(report.s_red))
    kept_mi = state.label_mi(kept) if kept else 0.0
    sat_mi = state.label_mi(report.s_sat)
    assert kept_mi >= sat_mi - mi_tol - 1e-12
