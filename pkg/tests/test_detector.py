"""Tests for scoring, IQR thresholds, flags and AUROC."""

import math

import numpy as np
import pytest

from entityflow.config import DetectorConfig, TrainConfig
from entityflow.core.data_model import ScoreSeries, ThresholdSet, WindowBatch
from entityflow.core.exceptions import ConfigurationError, DimensionError, UndefinedMetricError, UsageError
from entityflow.detector import auroc, build_report, fit_thresholds, flag, iqr_threshold, score
from entityflow.models import FlowModel
from tests.conftest import TINY_TRAIN


def sorted_interpolation_quartiles(values):
    """Q1 and Q3 by linear interpolation between order statistics."""
    ordered = sorted(values)
    n = len(ordered)

    def quantile(q):
        position = q * (n - 1)
        low = math.floor(position)
        high = min(low + 1, n - 1)
        return ordered[low] + (position - low) * (ordered[high] - ordered[low])

    return quantile(0.25), quantile(0.75)


def pair_counting_auroc(scores, labels):
    positives = [s for s, y in zip(scores, labels) if y]
    negatives = [s for s, y in zip(scores, labels) if not y]
    wins = 0.0
    for p in positives:
        for n in negatives:
            wins += 1.0 if p > n else 0.5 if p == n else 0.0
    return wins / (len(positives) * len(negatives))


def _series(window_scores, entity_scores=None):
    window_scores = np.asarray(window_scores, dtype=float)
    if entity_scores is None:
        entity_scores = window_scores[:, None]
    return ScoreSeries(
        window_scores=window_scores,
        entity_scores=np.asarray(entity_scores, dtype=float),
        starts=np.arange(len(window_scores)),
    )


class TestScore:
    """Tests for window and entity scores."""

    def test_standard_normal_score(self):
        """Identity flow, mu = 0, x = 0, T = 1, K = 1 scores 1/2 log(2 pi)."""
        config = TrainConfig(
            window=1, n_blocks=1, hidden_size=2, condition_size=2, made_hidden=2, single_target=True
        )
        model = FlowModel(1, config)
        windows = WindowBatch(values=np.zeros((1, 1, 1)), starts=np.array([0]))
        scores = score(model, windows)
        assert scores.window_scores[0] == pytest.approx(0.5 * math.log(2 * math.pi), abs=1e-12)
        assert scores.window_scores[0] == pytest.approx(0.918939, abs=1e-6)

    def test_window_score_is_entity_mean(self, rng):
        """K * S_c equals the sum of S_ck."""
        model = FlowModel(3, TrainConfig(**TINY_TRAIN))
        windows = WindowBatch(values=rng.normal(size=(10, 3, 8)), starts=np.arange(10))
        scores = score(model, windows)
        assert scores.entity_scores.shape == (10, 3)
        np.testing.assert_allclose(
            3 * scores.window_scores, scores.entity_scores.sum(axis=1), rtol=0, atol=1e-9
        )

    def test_duplicated_window_scores_equal(self, rng):
        """The same window scores the same wherever it appears."""
        model = FlowModel(2, TrainConfig(**TINY_TRAIN))
        window = rng.normal(size=(1, 2, 8))
        values = np.concatenate([window, rng.normal(size=(1, 2, 8)), window])
        scores = score(model, WindowBatch(values=values, starts=np.arange(3)))
        assert scores.window_scores[0] == pytest.approx(scores.window_scores[2], rel=1e-12)

    def test_workers_do_not_change_results(self, rng):
        """Threaded scoring matches sequential scoring exactly."""
        model = FlowModel(3, TrainConfig(**TINY_TRAIN))
        windows = WindowBatch(values=rng.normal(size=(37, 3, 8)), starts=np.arange(37))
        sequential = score(model, windows, batch_size=5)
        threaded = score(model, windows, batch_size=5, max_workers=4)
        np.testing.assert_array_equal(sequential.entity_scores, threaded.entity_scores)
        np.testing.assert_array_equal(sequential.starts, threaded.starts)

    def test_empty_windows(self):
        """No windows, no scores."""
        model = FlowModel(2, TrainConfig(**TINY_TRAIN))
        windows = WindowBatch(values=np.zeros((0, 2, 8)), starts=np.zeros(0, dtype=np.int64))
        scores = score(model, windows)
        assert scores.n_windows == 0
        assert scores.entity_scores.shape == (0, 2)

    def test_shape_mismatch(self, rng):
        """Windows with a different K are rejected."""
        model = FlowModel(2, TrainConfig(**TINY_TRAIN))
        windows = WindowBatch(values=rng.normal(size=(2, 3, 8)), starts=np.arange(2))
        with pytest.raises(DimensionError):
            score(model, windows)


class TestIqrThreshold:
    """Tests for the IQR rule."""

    def test_worked_example(self):
        """[1..5]: Q1 = 2, Q3 = 4, threshold 7."""
        assert iqr_threshold([1, 2, 3, 4, 5]) == 7.0

    def test_constant_scores(self):
        """Zero spread gives the score itself."""
        assert iqr_threshold([2.5] * 6) == 2.5

    def test_lambda_scales(self):
        """lambda multiplies the lambda = 1 threshold."""
        scores = [0.3, 1.7, 2.2, 5.0, 4.1, 0.9]
        assert iqr_threshold(scores, 0.8) == pytest.approx(0.8 * iqr_threshold(scores), rel=1e-15)
        assert iqr_threshold(scores, 0.8) < iqr_threshold(scores, 1.2)

    def test_permutation_invariant(self, rng):
        """Order of the scores does not matter."""
        scores = rng.normal(size=30)
        assert iqr_threshold(scores) == iqr_threshold(rng.permutation(scores))

    def test_matches_sorted_interpolation(self, rng):
        """Agrees with quartiles interpolated on the sorted list."""
        for _ in range(1000):
            values = rng.normal(size=int(rng.integers(4, 60))).tolist()
            q1, q3 = sorted_interpolation_quartiles(values)
            assert iqr_threshold(values) == pytest.approx(q3 + 1.5 * (q3 - q1), rel=1e-12, abs=1e-12)

    def test_needs_four_scores(self):
        """Fewer than four scores is a usage error."""
        with pytest.raises(UsageError):
            iqr_threshold([1.0, 2.0, 3.0])


class TestThresholdsAndFlags:
    """Tests for fitting thresholds and flagging."""

    def test_fit_uses_lambdas(self):
        """Global lambda 1 and entity lambda 0.8 by default; overrides per entity."""
        entity = np.array([[1, 10], [2, 20], [3, 30], [4, 40], [5, 50]], dtype=float)
        train_scores = _series(entity.mean(axis=1), entity)
        thresholds = fit_thresholds(train_scores)
        assert thresholds.global_threshold == pytest.approx(iqr_threshold(entity.mean(axis=1)))
        np.testing.assert_allclose(thresholds.entity_thresholds, [0.8 * 7.0, 0.8 * 70.0])

        custom = fit_thresholds(train_scores, DetectorConfig(entity_lambdas=[1.0, 0.5]))
        np.testing.assert_allclose(custom.entity_thresholds, [7.0, 35.0])

    def test_entity_lambda_count_mismatch(self):
        """One override per entity is required."""
        train_scores = _series(np.arange(5.0), np.ones((5, 2)))
        with pytest.raises(ConfigurationError):
            fit_thresholds(train_scores, DetectorConfig(entity_lambdas=[1.0]))

    def test_equal_to_threshold_is_not_flagged(self):
        """The comparison is strict."""
        thresholds = ThresholdSet(global_threshold=2.0, entity_thresholds=np.array([2.0]))
        window_flags, entity_flags = flag(_series([1.0, 2.0, 2.0000001]), thresholds)
        assert window_flags.tolist() == [False, False, True]
        assert entity_flags[:, 0].tolist() == [False, False, True]

    def test_empty_scores_give_empty_flags(self):
        """No windows, no flags."""
        thresholds = ThresholdSet(global_threshold=1.0, entity_thresholds=np.array([1.0, 1.0]))
        window_flags, entity_flags = flag(_series(np.zeros(0), np.zeros((0, 2))), thresholds)
        assert window_flags.shape == (0,)
        assert entity_flags.shape == (0, 2)

    def test_entity_can_flag_without_global(self):
        """A single entity can exceed its threshold while the window mean does not."""
        thresholds = ThresholdSet(global_threshold=5.0, entity_thresholds=np.array([3.0, 3.0]))
        window_flags, entity_flags = flag(_series([2.5], [[4.0, 1.0]]), thresholds)
        assert not window_flags[0]
        assert entity_flags[0].tolist() == [True, False]


class TestAuroc:
    """Tests for the rank-based AUROC."""

    def test_perfect_separation(self):
        assert auroc([0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0]) == 1.0

    def test_all_ties(self):
        assert auroc([1.0] * 6, [1, 0, 1, 0, 0, 1]) == 0.5

    def test_one_win_one_loss(self):
        """Positives {3, 1} against negative {2}."""
        assert auroc([3, 2, 1], [1, 0, 1]) == 0.5

    def test_matches_pair_counting(self, rng):
        """Equals brute-force pair counting, ties included."""
        for _ in range(200):
            n = int(rng.integers(2, 51))
            scores = rng.integers(0, 8, size=n).astype(float).tolist()
            labels = (rng.random(n) > 0.6).tolist()
            labels[0], labels[-1] = True, False
            assert auroc(scores, labels) == pytest.approx(pair_counting_auroc(scores, labels), abs=1e-12)

    def test_monotone_transform_invariance(self, rng):
        """Strictly increasing transforms leave AUROC unchanged."""
        scores = rng.normal(size=40)
        labels = rng.random(40) > 0.5
        labels[:2] = [True, False]
        assert auroc(np.exp(scores), labels) == auroc(scores, labels)

    def test_negated_scores_complement(self, rng):
        """Without ties, AUROC of -s is one minus AUROC of s."""
        scores = rng.normal(size=30)
        labels = rng.random(30) > 0.5
        labels[:2] = [True, False]
        assert auroc(scores, labels) + auroc(-scores, labels) == pytest.approx(1.0, abs=1e-12)

    def test_single_class(self):
        with pytest.raises(UndefinedMetricError):
            auroc([0.1, 0.5], [0, 0])

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            auroc([0.1, 0.5], [0, 1, 1])


class TestReport:
    """Tests for the assembled report."""

    def _thresholds(self):
        return ThresholdSet(global_threshold=1.5, entity_thresholds=np.array([1.0, 2.0]))

    def test_report_with_labels(self):
        """Labels with both classes give an AUROC and a labeled CSV column."""
        scores = _series([1.0, 2.0, 3.0], [[0.5, 1.5], [1.5, 2.5], [2.5, 3.5]])
        report = build_report(scores, self._thresholds(), ["a", "b"], labels=np.array([False, True, True]))
        assert report.auroc == 1.0
        frame = report.to_dataframe()
        assert list(frame.columns) == [
            "window_start", "S_c", "flag", "S_c1", "S_c2", "flag_1", "flag_2", "label"
        ]
        assert frame["flag"].tolist() == [0, 1, 1]
        assert "AUROC: 1.000000" in report.summary()

    def test_single_class_labels_are_noted(self):
        """Single-class labels leave AUROC undefined with a note."""
        scores = _series([1.0, 2.0], [[1.0, 1.0], [2.0, 2.0]])
        report = build_report(scores, self._thresholds(), ["a", "b"], labels=np.array([False, False]))
        assert report.auroc is None
        assert report.auroc_note == "single-class labels"
        assert "AUROC: undefined (single-class labels)" in report.summary()

    def test_unlabeled_report(self, tmp_path):
        """Without labels there is no AUROC line and no label column."""
        scores = _series([1.0, 2.0], [[1.0, 1.0], [2.0, 2.0]])
        report = build_report(scores, self._thresholds(), ["a", "b"])
        assert "AUROC" not in report.summary()
        path = tmp_path / "report.csv"
        report.to_csv(str(path))
        assert path.read_text().splitlines()[0] == "window_start,S_c,flag,S_c1,S_c2,flag_1,flag_2"


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
