"""Metric tests. AUC is checked against a pairwise-comparison oracle and
the McNemar p-value against brute-force enumeration of coin-flip
assignments, so the implementations are never compared to themselves."""

import itertools
import json
import math
from fractions import Fraction

import numpy as np
import numpy.testing as npt
import pytest

from csma.errors import (
    ConsistencyError,
    DegenerateLabelsError,
    EmptyInputError,
    UndefinedRateError,
    ValidationError,
)
from csma.metrics import (
    EvalReport,
    evaluate,
    format_pct,
    mcnemar_test,
    minor_misclassification_rate,
    report_lines,
    report_metrics_dict,
    roc_auc,
    roc_points,
    write_report,
    write_roc_csv,
)


def auc_pairwise_oracle(scores, labels):
    # P(adult score > minor score) with ties counted half
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    minors = scores[labels == 0]
    adults = scores[labels == 1]
    total = Fraction(0)
    for a in adults:
        for m in minors:
            if a > m:
                total += 1
            elif a == m:
                total += Fraction(1, 2)
    return float(total / (len(adults) * len(minors)))


def mcnemar_p_oracle(b, c):
    # enumerate every equally likely split of the n discordant pairs
    n = b + c
    if n == 0:
        return Fraction(1)
    k = min(b, c)
    hits = sum(1 for flips in itertools.product((0, 1), repeat=n)
               if sum(flips) <= k or sum(flips) >= n - k)
    return Fraction(hits, 2**n)


def correctness_arrays(b, c, both_right=5, both_wrong=2):
    a = [1] * both_right + [0] * both_wrong + [1] * b + [0] * c
    z = [1] * both_right + [0] * both_wrong + [0] * b + [1] * c
    return np.array(a), np.array(z)


class TestFormatPct:
    def test_two_decimals(self):
        assert format_pct(92.085) == "92.09"
        assert format_pct(92.0849) == "92.08"
        assert format_pct(0.0) == "0.00"
        assert format_pct(100.0) == "100.00"
        assert format_pct(9.345) == "9.35"

    def test_binary_midpoint_robust(self):
        # both float neighbours of the decimal midpoint display the same
        assert format_pct(92.08499999999999) == "92.09"
        assert format_pct(92.08500000000001) == "92.09"

    def test_half_up_not_bankers(self):
        assert format_pct(2.675) == "2.68"
        assert format_pct(2.665) == "2.67"


class TestRocPoints:
    def test_endpoints_and_length(self):
        scores = [0.1, 0.4, 0.35, 0.8]
        labels = [0, 0, 1, 1]
        pts = roc_points(scores, labels)
        assert len(pts) == len(set(scores)) + 2
        assert pts[0][:2] == (0.0, 0.0)
        assert pts[-1][:2] == (1.0, 1.0)

    def test_monotone(self):
        rng = np.random.default_rng(0)
        scores = rng.random(60)
        labels = rng.integers(0, 2, 60)
        labels[:2] = [0, 1]
        pts = roc_points(scores, labels)
        fprs = [p[0] for p in pts]
        tprs = [p[1] for p in pts]
        assert all(a <= b for a, b in zip(fprs, fprs[1:]))
        assert all(a <= b for a, b in zip(tprs, tprs[1:]))

    def test_threshold_calls_adult_at_equality(self):
        pts = roc_points([0.3, 0.3, 0.5], [0, 0, 1])
        at_half = next(p for p in pts if p[2] == 0.5)
        assert at_half == (0.0, 1.0, 0.5)

    def test_permutation_invariant_exactly(self):
        rng = np.random.default_rng(1)
        scores = rng.integers(0, 10, 50) / 10.0  # ties guaranteed
        labels = rng.integers(0, 2, 50)
        labels[:2] = [0, 1]
        order = rng.permutation(50)
        assert roc_points(scores, labels) == roc_points(scores[order], labels[order])

    def test_single_class_rejected(self):
        with pytest.raises(DegenerateLabelsError):
            roc_points([0.1, 0.2], [1, 1])

    def test_length_mismatch(self):
        with pytest.raises(ConsistencyError):
            roc_points([0.1, 0.2], [0, 1, 1])

    def test_nonfinite_scores_rejected(self):
        with pytest.raises(ValidationError):
            roc_points([0.1, np.inf], [0, 1])


class TestAuc:
    def test_perfect_separation_is_one(self):
        pts = roc_points([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1])
        assert roc_auc(pts) == 1.0

    def test_constant_scores_give_half(self):
        pts = roc_points([0.7] * 6, [0, 1, 0, 1, 0, 1])
        assert roc_auc(pts) == 0.5

    def test_inverted_scores_give_zero(self):
        pts = roc_points([0.9, 0.8, 0.1, 0.2], [0, 0, 1, 1])
        assert roc_auc(pts) == 0.0

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_matches_pairwise_oracle(self, seed):
        rng = np.random.default_rng(seed)
        scores = rng.integers(0, 8, 40) / 8.0  # coarse grid forces ties
        labels = rng.integers(0, 2, 40)
        labels[:2] = [0, 1]
        auc = roc_auc(roc_points(scores, labels))
        assert math.isclose(auc, auc_pairwise_oracle(scores, labels), rel_tol=1e-12)

    def test_needs_two_points(self):
        with pytest.raises(EmptyInputError):
            roc_auc([(0.0, 0.0, 1.0)])


class TestMcNemar:
    @pytest.mark.parametrize("b,c,expected", [
        (10, 0, 0.001953125),
        (5, 5, 1.0),
        (0, 0, 1.0),
        (3, 7, 0.34375),
    ])
    def test_closed_forms_exact(self, b, c, expected):
        res = mcnemar_test(*correctness_arrays(b, c))
        assert res.b == b and res.c == c
        assert res.p_value == expected

    @pytest.mark.parametrize("b,c", [(0, 1), (2, 3), (4, 4), (1, 9), (6, 2), (0, 12)])
    def test_matches_enumeration_oracle(self, b, c):
        res = mcnemar_test(*correctness_arrays(b, c))
        assert res.p_value == float(min(Fraction(1), mcnemar_p_oracle(b, c)))

    def test_symmetric_in_model_order(self):
        a, z = correctness_arrays(8, 3)
        fwd = mcnemar_test(a, z)
        rev = mcnemar_test(z, a)
        assert (fwd.b, fwd.c) == (rev.c, rev.b)
        assert fwd.p_value == rev.p_value

    def test_significance_flag(self):
        assert mcnemar_test(*correctness_arrays(10, 0)).significant_at_95
        assert not mcnemar_test(*correctness_arrays(3, 7)).significant_at_95

    def test_identical_models_p_one(self):
        flags = np.array([1, 0, 1, 1, 0])
        res = mcnemar_test(flags, flags)
        assert (res.b, res.c, res.p_value) == (0, 0, 1.0)

    def test_empty_rejected(self):
        with pytest.raises(EmptyInputError):
            mcnemar_test([], [])

    def test_length_mismatch(self):
        with pytest.raises(ConsistencyError):
            mcnemar_test([1, 0], [1])


class TestMinorMisclassificationRate:
    def test_published_scale_example(self):
        labels = np.zeros(20000, np.int64)
        labels[10000:] = 1
        preds = labels.copy()
        preds[:935] = 1  # 935 of 10000 minors called adult
        assert minor_misclassification_rate(preds, labels) == 9.35
        assert format_pct(minor_misclassification_rate(preds, labels)) == "9.35"

    def test_counting_oracle(self):
        rng = np.random.default_rng(3)
        labels = rng.integers(0, 2, 200)
        labels[0] = 0
        preds = rng.integers(0, 2, 200)
        expected = 100.0 * sum(
            1 for p, y in zip(preds, labels) if y == 0 and p == 1
        ) / sum(1 for y in labels if y == 0)
        assert minor_misclassification_rate(preds, labels) == expected

    def test_zero_when_all_correct(self):
        assert minor_misclassification_rate([0, 0, 1], [0, 0, 1]) == 0.0

    def test_undefined_without_minors(self):
        with pytest.raises(UndefinedRateError):
            minor_misclassification_rate([1, 1], [1, 1])


def split_accuracy_case():
    # 10000 per class; 9352 minors and 9065 adults classified correctly
    labels = np.concatenate([np.zeros(10000, np.int64), np.ones(10000, np.int64)])
    preds = labels.copy()
    preds[:648] = 1
    preds[10000:10935] = 0
    scores = preds.astype(np.float64)
    return preds, scores, labels


class TestEvaluate:
    def test_confusion_matches_loop_count(self):
        rng = np.random.default_rng(4)
        labels = rng.integers(0, 2, 100)
        labels[:2] = [0, 1]
        preds = rng.integers(0, 2, 100)
        scores = rng.random(100)
        rep = evaluate(preds, scores, labels)
        for actual in (0, 1):
            for predicted in (0, 1):
                count = sum(1 for p, y in zip(preds, labels)
                            if y == actual and p == predicted)
                assert rep.confusion[actual, predicted] == count
        assert rep.n_samples == 100

    def test_mean_accuracy_display_example(self):
        preds, scores, labels = split_accuracy_case()
        rep = evaluate(preds, scores, labels)
        assert rep.acc_minor == 93.52
        assert rep.acc_adult == 90.65
        assert abs(rep.mean_accuracy - 92.085) <= 1e-12
        assert format_pct(rep.mean_accuracy) == "92.09"
        assert rep.minor_misclassification_rate == 100.0 * 648 / 10000

    def test_all_correct(self):
        rep = evaluate([0, 0, 1, 1], [0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1])
        assert rep.acc_minor == rep.acc_adult == rep.mean_accuracy == 100.0
        assert rep.minor_misclassification_rate == 0.0
        assert rep.auc == 1.0

    def test_predict_all_adult_scores_half_mean(self):
        rep = evaluate([1, 1, 1, 1], [0.9, 0.9, 0.9, 0.9], [0, 0, 1, 1])
        assert rep.acc_minor == 0.0
        assert rep.acc_adult == 100.0
        assert rep.mean_accuracy == 50.0
        assert rep.auc == 0.5

    def test_permutation_invariant(self):
        rng = np.random.default_rng(5)
        labels = rng.integers(0, 2, 80)
        labels[:2] = [0, 1]
        preds = rng.integers(0, 2, 80)
        scores = rng.integers(0, 5, 80) / 5.0
        order = rng.permutation(80)
        a = evaluate(preds, scores, labels)
        b = evaluate(preds[order], scores[order], labels[order])
        npt.assert_array_equal(a.confusion, b.confusion)
        assert a.mean_accuracy == b.mean_accuracy
        assert a.roc == b.roc
        assert a.auc == b.auc

    def test_single_class_rejected(self):
        with pytest.raises(DegenerateLabelsError):
            evaluate([0, 1], [0.2, 0.8], [1, 1])

    def test_length_mismatches(self):
        with pytest.raises(ConsistencyError):
            evaluate([0, 1, 1], [0.5, 0.5], [0, 1])
        with pytest.raises(ConsistencyError):
            evaluate([0, 1], [0.5], [0, 1])

    def test_nonbinary_predictions_rejected(self):
        with pytest.raises(ValidationError):
            evaluate([0, 2], [0.5, 0.5], [0, 1])


class TestReportOutput:
    def make_report(self, with_mcnemar=False):
        rep = evaluate([0, 1, 1, 1], [0.2, 0.6, 0.7, 0.9], [0, 0, 1, 1])
        if with_mcnemar:
            rep.mcnemar = mcnemar_test(*correctness_arrays(3, 1))
        return rep

    def test_lines_have_expected_keys(self):
        keys = [line.split(":")[0] for line in report_lines(self.make_report())]
        assert keys == [
            "samples", "minor_count", "adult_count",
            "confusion_minor_as_minor", "confusion_minor_as_adult",
            "confusion_adult_as_minor", "confusion_adult_as_adult",
            "acc_minor_pct", "acc_adult_pct", "mean_accuracy_pct",
            "minor_misclassification_rate_pct", "roc_auc",
        ]

    def test_mcnemar_lines_appended(self):
        lines = report_lines(self.make_report(with_mcnemar=True))
        assert "mcnemar_b: 3" in lines
        assert "mcnemar_c: 1" in lines
        assert any(line.startswith("mcnemar_p_value: ") for line in lines)
        assert "mcnemar_significant_at_95: false" in lines

    def test_write_report_round_trip(self, tmp_path):
        rep = self.make_report()
        path = tmp_path / "report.txt"
        write_report(rep, path)
        text = path.read_text()
        assert text.endswith("\n")
        assert text.splitlines() == report_lines(rep)

    def test_roc_csv_round_trips_floats(self, tmp_path):
        rep = self.make_report()
        path = tmp_path / "roc.csv"
        write_roc_csv(rep, path)
        rows = path.read_text().splitlines()
        assert rows[0] == "threshold,fpr,tpr"
        parsed = [tuple(float(v) for v in row.split(",")) for row in rows[1:]]
        assert parsed == [(t, f, p) for f, p, t in rep.roc]

    def test_metrics_dict_survives_json(self):
        rep = self.make_report(with_mcnemar=True)
        d = report_metrics_dict(rep)
        back = json.loads(json.dumps(d))
        assert back == d
        assert back["mean_accuracy"] == rep.mean_accuracy
        assert back["mcnemar"]["p_value"] == rep.mcnemar.p_value
