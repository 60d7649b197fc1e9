import itertools
import math

import numpy as np
import pytest

from fsur.audit import AuditTolerances, audit, detect_saturation, find_sred, partition_ur
from fsur.data import Dataset, FeatureKind, synth_duplicate, synth_gaussian, synth_xor
from fsur.estimators import EstimatorConfig
from fsur.relevance import ur_ksg
from fsur.selection import ScoreConfig, select

from conftest import dataset_joint_mi_oracle

LN2 = math.log(2)
CFG = EstimatorConfig()


def plain(method="gsa", budget=None):
    return ScoreConfig(method=method, beta=0.0, ur_source=None, budget=budget)


def random_dataset_with_derived_columns(rng):
    """Discrete dataset mixing informative columns, plain random columns,
    and derived columns that are exact functions of earlier ones (the
    removable kind)."""
    n = int(rng.integers(40, 120)) * 2
    y = np.repeat([0, 1], n // 2)
    y = y[rng.permutation(n)]
    cols = []
    n_base = int(rng.integers(2, 4))
    for _ in range(n_base):
        flip = rng.random(n) < rng.uniform(0.05, 0.4)
        cols.append(np.where(flip, 1 - y, y).astype(np.float64))
    n_rand = int(rng.integers(0, 3))
    for _ in range(n_rand):
        cols.append(rng.integers(0, int(rng.integers(2, 4)), size=n).astype(np.float64))
    n_derived = int(rng.integers(0, 3))
    for _ in range(n_derived):
        src = rng.choice(len(cols), size=min(2, len(cols)), replace=False)
        derived = np.zeros(n)
        for s in src:
            derived = derived + cols[int(s)]
        cols.append(derived % 2 if rng.random() < 0.5 else derived)
    features = np.column_stack(cols)
    m = features.shape[1]
    return Dataset(features=features, kinds=tuple([FeatureKind.DISCRETE] * m),
                   label=y, names=tuple(f"f{j}" for j in range(m)))


def brute_force_sred(d, s_ur, s_zur, mi_tol):
    """All-subsets search for the largest removable subset, written against
    the closed-form MI oracle.  Ties at the maximum size resolve to the
    lexicographically smallest index tuple.  A 1e-12 dust allowance covers
    float noise in the oracle's own sums."""
    base = dataset_joint_mi_oracle(d, tuple(s_ur) + tuple(s_zur))
    qualifying = []
    for r in range(len(s_zur), -1, -1):
        for removal in itertools.combinations(sorted(s_zur), r):
            keep = tuple(s_ur) + tuple(i for i in s_zur if i not in removal)
            kept = dataset_joint_mi_oracle(d, keep) if keep else 0.0
            if kept >= base - mi_tol - 1e-12:
                qualifying.append(removal)
        if qualifying:
            break
    best = min(qualifying)
    return set(best)


class TestDetectSaturation:
    def test_duplicate_pair_saturates_immediately(self):
        d = synth_duplicate(2, 8, 0)
        trace = select(d, plain("gsa"))
        assert trace.joint_mi_curve == pytest.approx([LN2, LN2], abs=1e-12)
        assert detect_saturation(trace, trace.joint_mi_curve[-1], 1e-3) == 1

    def test_xor_needs_both_inputs(self):
        d = synth_xor(0, 5, 0)
        trace = select(d, plain("gsa"))
        assert detect_saturation(trace, trace.joint_mi_curve[-1], 1e-3) == 2

    def test_zero_tolerance_on_flat_tail(self):
        d = synth_duplicate(3, 6, 0)
        trace = select(d, plain("gsa"))
        assert detect_saturation(trace, trace.joint_mi_curve[-1], 0.0) == 1

    def test_unreachable_threshold_errors(self):
        d = synth_xor(0, 5, 0)
        trace = select(d, plain("gsa", budget=1))
        with pytest.raises(ValueError, match="never reaches"):
            detect_saturation(trace, LN2, 1e-3)


class TestPartitionUr:
    def test_xor_inputs_carry_ur(self):
        d = synth_xor(0, 1, 0)
        prof = ur_ksg(d, CFG)
        s_ur, s_zur = partition_ur(d, (0, 1), prof, 1e-3)
        assert s_ur == (0, 1) and s_zur == ()

    def test_duplicates_have_none(self):
        d = synth_duplicate(2, 8, 0)
        prof = ur_ksg(d, CFG)
        s_ur, s_zur = partition_ur(d, (0,), prof, 1e-3)
        assert s_ur == () and s_zur == (0,)

    def test_threshold_dominates(self):
        d = synth_xor(0, 1, 0)
        prof = ur_ksg(d, CFG)
        s_ur, s_zur = partition_ur(d, (0, 1), prof, 10.0)
        assert s_ur == ()
        assert s_zur == (0, 1)


class TestFindSred:
    def test_duplicate_pair_removes_lexicographically_first(self):
        d = synth_duplicate(2, 8, 0)
        s_red, s_cr = find_sred(d, (), (0, 1), CFG, mi_tol=0.0)
        assert s_red == (0,)
        assert s_cr == (1,)

    def test_empty_zur(self):
        d = synth_xor(0, 1, 0)
        assert find_sred(d, (0, 1), (), CFG, mi_tol=0.0) == ((), ())

    def test_cap_errors(self):
        d = synth_duplicate(2, 8, 0)
        with pytest.raises(ValueError, match="exhaustive search infeasible"):
            find_sred(d, (), (0, 1), CFG, mi_tol=0.0, max_exhaustive=1)

    def test_matches_brute_force_oracle(self, rng):
        for _ in range(20):
            d = random_dataset_with_derived_columns(rng)
            prof = ur_ksg(d, CFG)
            every = tuple(range(d.n_features))
            s_ur, s_zur = partition_ur(d, every, prof, 1e-9)
            got_red, got_cr = find_sred(d, s_ur, s_zur, CFG, mi_tol=0.0)
            want = brute_force_sred(d, s_ur, s_zur, mi_tol=0.0)
            assert set(got_red) == want
            assert set(got_cr) == set(s_zur) - want


class TestAudit:
    def test_duplicate_pair_gamma_zero(self):
        # saturation happens at one feature; removing it would lose the label
        d = synth_duplicate(2, 8, 0)
        report = audit(d, plain("gsa"))
        assert report.sat_step == 1
        assert report.s_sat == (0,)
        assert report.s_ur == ()
        assert report.s_red == ()
        assert report.gamma == 0.0

    def test_xor_with_duplicated_input(self):
        # duplicating x1 erases its unique relevance (the copy stands in for
        # it), yet the selected x1 is still conditionally required: it lands
        # in the conditionally-relevant part, not the removable one
        base = synth_xor(0, 10, 0)
        feats = np.column_stack([base.features, base.features[:, 0]])
        d = Dataset(features=feats, kinds=tuple([FeatureKind.DISCRETE] * 3),
                    label=base.label, names=("x1", "x2", "x1copy"))
        report = audit(d, plain("gsa"))
        assert report.sat_step == 2
        assert report.s_ur == (1,)
        assert report.s_zur == (0,)
        assert report.s_cr == (0,)
        assert report.s_red == ()
        assert report.gamma == 0.0

    def test_copy_of_strong_feature_is_flagged_redundant(self, rng):
        # marginal ranking selects the strong feature and then its exact
        # copy before the weaker complement, so the copy sits inside the
        # saturated prefix and is removable
        n = 60
        y = np.repeat([0, 1], n // 2)[rng.permutation(n)]
        a = np.where(rng.random(n) < 0.15, 1 - y, y).astype(np.float64)
        b = np.where(rng.random(n) < 0.35, 1 - y, y).astype(np.float64)
        d = Dataset(features=np.column_stack([a, a, b]),
                    kinds=tuple([FeatureKind.DISCRETE] * 3), label=y,
                    names=("a", "acopy", "b"))
        report = audit(d, plain("mim"))
        assert report.s_sat == (0, 1, 2)
        assert report.s_red == (0,)
        assert report.s_cr == (1,)
        assert report.gamma == pytest.approx(1 / 3)

    def test_report_partition_invariants(self, rng):
        for _ in range(5):
            d = random_dataset_with_derived_columns(rng)
            report = audit(d, plain("gsa"))
            assert set(report.s_sat) == set(report.s_ur) | set(report.s_zur)
            assert set(report.s_zur) == set(report.s_cr) | set(report.s_red)
            assert report.gamma == len(report.s_red) / len(report.s_sat)
            assert 0.0 <= report.gamma <= 1.0

    def test_continuous_audit_runs(self):
        d = synth_gaussian(2, 2, 1, 80, seed=3)
        report = audit(d, plain("gsa"), AuditTolerances(rel_tol=5e-2, mi_tol=5e-2))
        assert report.sat_step <= d.n_features
        assert set(report.s_sat) <= set(range(d.n_features))

    def test_bur_reuses_trace_profile(self):
        d = synth_xor(2, 30, seed=5)
        cfg = ScoreConfig(method="gsa", beta=0.1, ur_source="ksg")
        report = audit(d, cfg)
        assert set(report.s_ur) == {0, 1}
