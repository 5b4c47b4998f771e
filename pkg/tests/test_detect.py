import numpy as np
import pytest

from mri_forge.detect import (
    AggregationParams,
    ConfusionMatrix,
    FaceScore,
    aggregate_video,
    confusion,
    evaluate,
    grid_search,
    group_by_video,
    metrics,
    roc_auc,
)
from oracles import aggregate_reference, roc_auc_trapezoid


def faces(video_id, probs):
    return [FaceScore(video_id, i, 0, p) for i, p in enumerate(probs)]


class TestAggregate:
    def test_worked_example(self):
        verdict, score = aggregate_video(
            faces("v", [0.9, 0.2, 0.85]), AggregationParams(0.8, 0.3)
        )
        assert verdict == "fake"
        assert score == pytest.approx(2 / 3)

    def test_all_zero_probs(self):
        verdict, score = aggregate_video(faces("v", [0.0] * 5), AggregationParams(0.5, 0.1))
        assert (verdict, score) == ("real", 0.0)

    def test_empty_is_undetermined(self):
        with pytest.raises(ValueError, match="undetermined"):
            aggregate_video([], AggregationParams(0.5, 0.5))

    def test_strict_comparisons(self):
        # exactly at the threshold does not count; exactly at the fraction stays real
        verdict, score = aggregate_video(faces("v", [0.8, 0.8]), AggregationParams(0.8, 0.0))
        assert (verdict, score) == ("real", 0.0)
        verdict, score = aggregate_video(faces("v", [0.9, 0.1]), AggregationParams(0.8, 0.5))
        assert (verdict, score) == ("real", 0.5)

    def test_presets(self):
        assert AggregationParams.preset("plain-frames") == AggregationParams(0.80, 0.30)
        assert AggregationParams.preset("mri") == AggregationParams(0.70, 0.30)
        with pytest.raises(ValueError):
            AggregationParams.preset("nope")

    def test_matches_enumeration_oracle(self, rng):
        for _ in range(500):
            probs = rng.uniform(0, 1, size=rng.integers(1, 51)).tolist()
            params = AggregationParams(float(rng.uniform(0, 1)), float(rng.uniform(0, 1)))
            ours = aggregate_video(faces("v", probs), params)
            ref = aggregate_reference(probs, params.fake_frame_threshold, params.fake_fraction)
            assert ours[0] == ref[0]
            assert ours[1] == pytest.approx(ref[1])

    def test_threshold_monotonicity(self, rng):
        for _ in range(100):
            probs = rng.uniform(0, 1, size=20).tolist()
            fs = faces("v", probs)
            last_score = 1.1
            for thr in np.linspace(0, 1, 11):
                _, score = aggregate_video(fs, AggregationParams(float(thr), 0.3))
                assert score <= last_score
                last_score = score


class TestConfusion:
    def test_perfect(self):
        cm = confusion(["fake", "real"], ["fake", "real"])
        assert (cm.tp, cm.fp, cm.tn, cm.fn) == (1, 0, 1, 0)

    def test_miss(self):
        cm = confusion(["real", "real"], ["fake", "real"])
        assert (cm.tp, cm.fn, cm.tn, cm.fp) == (0, 1, 1, 0)

    def test_all_fake_on_balanced_set(self):
        verdicts = ["fake"] * 10
        labels = ["fake"] * 5 + ["real"] * 5
        cm = confusion(verdicts, labels)
        assert (cm.tp, cm.fp) == (5, 5)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            confusion(["fake"], ["fake", "real"])


class TestMetrics:
    def test_worked_example(self):
        report = metrics(ConfusionMatrix(tp=9, fn=1, fp=4, tn=46))
        assert report.tpr == pytest.approx(0.9)
        assert report.fpr == pytest.approx(0.08)
        assert report.accuracy == pytest.approx(55 / 60)
        assert report.tpr + report.fnr == pytest.approx(1.0)
        assert report.tnr + report.fpr == pytest.approx(1.0)

    def test_perfect_classifier(self):
        report = metrics(ConfusionMatrix(tp=5, tn=5))
        assert report.tpr == report.tnr == report.accuracy == 1.0
        assert report.balanced_accuracy == report.f1 == report.precision == 1.0
        assert report.fnr == report.fpr == 0.0

    def test_undefined_ratios_absent(self):
        report = metrics(ConfusionMatrix(tn=3, fp=1))  # no positives at all
        assert report.tpr is None and report.fnr is None
        assert "tpr" not in report.as_dict()
        assert report.tnr == pytest.approx(0.75)

    def test_auc_requires_consistent_lengths(self):
        with pytest.raises(ValueError):
            metrics(ConfusionMatrix(tp=1, tn=1), [0.5], ["fake"])


class TestRocAuc:
    def test_perfect_separation(self):
        assert roc_auc([0.9, 0.8, 0.1, 0.2], ["fake", "fake", "real", "real"]) == 1.0

    def test_all_ties(self):
        assert roc_auc([0.5] * 6, ["fake"] * 3 + ["real"] * 3) == 0.5

    def test_pairwise_example(self):
        auc = roc_auc([0.9, 0.4, 0.6, 0.1], ["fake", "fake", "real", "real"])
        assert auc == pytest.approx(0.75)

    def test_single_class_rejected(self):
        with pytest.raises(ValueError):
            roc_auc([0.5, 0.6], ["fake", "fake"])

    def test_matches_trapezoid_oracle(self, rng):
        for _ in range(100):
            n = int(rng.integers(4, 40))
            labels = rng.integers(0, 2, n)
            if labels.all() or not labels.any():
                labels[0] = 0
                labels[1] = 1
            scores = np.round(rng.uniform(0, 1, n), 2)  # rounding makes ties likely
            ours = roc_auc(scores.tolist(), labels.tolist())
            ref = roc_auc_trapezoid(scores.tolist(), labels.tolist())
            assert ours == pytest.approx(ref, abs=1e-9)


class TestGridSearch:
    def test_single_cell(self):
        grouped = {"f": faces("f", [0.9]), "r": faces("r", [0.1])}
        labels = {"f": "fake", "r": "real"}
        best, table = grid_search(grouped, labels, [0.5], [0.5])
        assert best == AggregationParams(0.5, 0.5)
        assert len(table) == 1

    def test_constructed_unique_optimum(self):
        grouped = {
            "f1": faces("f1", [0.7, 0.7, 0.1]),
            "r1": faces("r1", [0.4, 0.4, 0.4]),
            "r2": faces("r2", [0.7, 0.1, 0.1]),
        }
        labels = {"f1": "fake", "r1": "real", "r2": "real"}
        best, table = grid_search(grouped, labels, [0.3, 0.6], [0.2, 0.5])
        assert best == AggregationParams(0.6, 0.5)
        zero_error = [c for c in table if c["balanced_accuracy"] == 1.0]
        assert len(zero_error) == 1
        assert zero_error[0]["fake_frame_threshold"] == 0.6
        assert zero_error[0]["fake_fraction"] == 0.5

    def test_best_is_argmax_of_table(self, rng):
        grouped = {}
        labels = {}
        for i in range(12):
            vid = f"v{i}"
            labels[vid] = "fake" if i % 2 else "real"
            base = 0.7 if labels[vid] == "fake" else 0.3
            grouped[vid] = faces(vid, np.clip(rng.normal(base, 0.2, 8), 0, 1).tolist())
        best, table = grid_search(grouped, labels)
        top = max(table, key=lambda c: c["balanced_accuracy"])
        best_cell = next(
            c
            for c in table
            if c["fake_frame_threshold"] == best.fake_frame_threshold
            and c["fake_fraction"] == best.fake_fraction
        )
        assert best_cell["balanced_accuracy"] == top["balanced_accuracy"]

    def test_video_order_invariance(self, rng):
        grouped = {}
        labels = {}
        for i in range(8):
            vid = f"v{i}"
            labels[vid] = "fake" if i < 4 else "real"
            grouped[vid] = faces(vid, rng.uniform(0, 1, 5).tolist())
        fwd, _ = grid_search(grouped, labels, [0.4, 0.6], [0.2, 0.4])
        rev_grouped = dict(reversed(list(grouped.items())))
        rev, _ = grid_search(rev_grouped, labels, [0.4, 0.6], [0.2, 0.4])
        assert fwd == rev

    def test_empty_grid_rejected(self):
        with pytest.raises(ValueError):
            grid_search({"v": faces("v", [0.5])}, {"v": "fake"}, [], [0.5])


def test_evaluate_pipeline(rng):
    grouped = group_by_video(
        faces("f1", [0.9, 0.95]) + faces("r1", [0.1, 0.2]) + faces("f2", [0.85, 0.2])
    )
    labels = {"f1": "fake", "r1": "real", "f2": "fake"}
    verdicts, cm, report = evaluate(grouped, labels, AggregationParams(0.8, 0.3))
    assert verdicts == {"f1": "fake", "r1": "real", "f2": "fake"}
    assert cm.total == 3
    assert report.accuracy == 1.0

    with pytest.raises(ValueError, match="no label"):
        evaluate({"ghost": faces("ghost", [0.5])}, labels, AggregationParams(0.5, 0.5))
