import numpy as np
import pytest

from fsur.data import FeatureKind, synth_gaussian
from fsur.knn import knn_accuracy, knn_predict_proba

CONT = (FeatureKind.CONTINUOUS,)
DISC = (FeatureKind.DISCRETE,)


class TestPredictProba:
    def test_exact_match_k1_unsmoothed(self):
        train = np.array([[0.0], [1.0], [2.0], [3.0]])
        labels = np.array([0, 1, 1, 0])
        probs = knn_predict_proba(train, labels, 2, CONT, np.array([[1.0]]), k=1, smoothing=0.0)
        assert probs.tolist() == [[0.0, 1.0]]

    def test_equidistant_query_splits_votes(self):
        train = np.array([[0.0], [1.0]])
        labels = np.array([0, 1])
        probs = knn_predict_proba(train, labels, 2, CONT, np.array([[0.5]]), k=2, smoothing=0.0)
        assert probs.tolist() == [[0.5, 0.5]]

    def test_smoothing_arithmetic(self):
        # votes (3, 0) with smoothing 1, k 3, C 2 -> (4/5, 1/5)
        train = np.array([[0.0], [0.1], [0.2], [9.0]])
        labels = np.array([0, 0, 0, 1])
        probs = knn_predict_proba(train, labels, 2, CONT, np.array([[0.05]]), k=3, smoothing=1.0)
        assert probs[0] == pytest.approx([4 / 5, 1 / 5], abs=1e-12)

    def test_distance_tie_breaks_to_lower_train_row(self):
        train = np.array([[0.0], [0.0]])
        labels = np.array([1, 0])
        probs = knn_predict_proba(train, labels, 2, DISC, np.array([[0.0]]), k=1, smoothing=0.0)
        assert probs.tolist() == [[0.0, 1.0]]

    def test_rows_sum_to_one(self, rng):
        d = synth_gaussian(3, 0, 2, 60, seed=1)
        q = rng.standard_normal((25, 5))
        probs = knn_predict_proba(d.features, d.label, 2, d.kinds, q, k=7, smoothing=0.5)
        assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="columns"):
            knn_predict_proba(np.zeros((4, 2)), np.array([0, 1, 0, 1]), 2,
                              (FeatureKind.CONTINUOUS,) * 2, np.zeros((1, 3)), k=1)

    def test_k_bounds(self):
        train = np.zeros((4, 1))
        labels = np.array([0, 1, 0, 1])
        with pytest.raises(ValueError, match="k=5"):
            knn_predict_proba(train, labels, 2, DISC, np.zeros((1, 1)), k=5)
        with pytest.raises(ValueError, match="k=0"):
            knn_predict_proba(train, labels, 2, DISC, np.zeros((1, 1)), k=0)


class TestAccuracy:
    def test_training_set_is_perfect_with_k1(self):
        d = synth_gaussian(4, 0, 0, 40, seed=3)
        acc = knn_accuracy(d.features, d.label, 2, d.kinds, d.features, d.label,
                           k=1, smoothing=0.0)
        assert acc == 1.0

    def test_separated_blobs_generalize(self):
        train = synth_gaussian(3, 0, 0, 100, class_sep=8.0, seed=4)
        test = synth_gaussian(3, 0, 0, 60, class_sep=8.0, seed=5)
        acc = knn_accuracy(train.features, train.label, 2, train.kinds,
                           test.features, test.label, k=5)
        assert acc > 0.95
