"""Evaluation metrics against brute-force recomputation."""

import numpy as np
import pytest

from compoundcl.errors import IncompleteLogError
from compoundcl.metrics import (
    RunLog,
    StepRecord,
    ave_sa,
    battery_step_table,
    confusion_matrix,
    overall_accuracy,
    step_accuracy,
    write_step_csv,
    write_summary_json,
)


def make_log(ordering_id, step_preds, truth):
    """step_preds: list of prediction arrays, one per step starting at 0."""
    log = RunLog(ordering_id, [f"c{i}" for i in range(1, len(step_preds))])
    for i, pred in enumerate(step_preds):
        mask = None if i == 0 else (np.arange(len(truth)) % len(step_preds)) == i
        log.steps.append(StepRecord(i, np.array(truth), np.array(pred), mask))
    return log


class TestStepAccuracy:
    def test_all_correct(self):
        assert step_accuracy([1, 2, 3], [1, 2, 3]) == 1.0

    def test_none_correct(self):
        assert step_accuracy([1, 2, 3], [0, 0, 0]) == 0.0

    def test_three_of_four(self):
        assert step_accuracy([0, 1, 2, 3], [0, 1, 2, 0]) == 0.75

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            step_accuracy([], [])

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            step_accuracy([1], [1, 2])


class TestAveSA:
    def test_single_ordering_equals_step_accuracy(self):
        log = make_log(0, [[0, 1, 0, 1]], [0, 1, 1, 1])
        assert ave_sa([log], 0) == step_accuracy([0, 1, 1, 1], [0, 1, 0, 1])

    def test_two_orderings_hand_case(self):
        a = make_log(0, [[0, 1, 2, 3]], [0, 1, 2, 0])  # 0.75
        b = make_log(1, [[0, 0, 0, 0]], [0, 0, 1, 1])  # 0.5
        assert ave_sa([a, b], 0) == 0.625

    def test_duplicated_logs_leave_mean_unchanged(self):
        log = make_log(0, [[0, 1, 0, 1]], [0, 1, 1, 1])
        single = ave_sa([log], 0)
        assert ave_sa([log] * 5, 0) == single

    def test_missing_step_rejected(self):
        log = make_log(0, [[0, 1]], [0, 1])
        with pytest.raises(IncompleteLogError):
            ave_sa([log], 3)


class TestOverallAccuracy:
    def test_two_step_mean(self):
        truth = [0, 0]
        log = make_log(0, [[0, 0], [0, 1]], truth)  # step accuracies 1.0, 0.5
        assert overall_accuracy([log], include_step0=True) == 0.75

    def test_constant_accuracy_is_identity(self):
        truth = [0, 1]
        log = make_log(0, [[0, 1], [0, 1], [0, 1]], truth)
        assert overall_accuracy([log]) == 1.0

    def test_step0_toggle(self):
        truth = [0, 0]
        log = make_log(0, [[0, 0], [1, 1]], truth)
        assert overall_accuracy([log], include_step0=True) == 0.5
        assert overall_accuracy([log], include_step0=False) == 0.0

    def test_ragged_logs_rejected(self):
        a = make_log(0, [[0], [0]], [0])
        b = make_log(1, [[0]], [0])
        with pytest.raises(IncompleteLogError):
            overall_accuracy([a, b])

    def test_brute_force_oracle_agreement(self, rng):
        # recompute from raw records with plain Python loops
        logs = []
        n, steps = 40, 5
        truth = rng.integers(0, 6, n)
        for j in range(4):
            preds = [rng.integers(0, 6, n) for _ in range(steps + 1)]
            logs.append(make_log(j, preds, truth))
        got = overall_accuracy(logs, include_step0=True)
        acc_sum = 0.0
        for i in range(steps + 1):
            step_mean = 0.0
            for log in logs:
                rec = log.step_record(i)
                hits = sum(1 for a, b in zip(rec.truth, rec.pred) if a == b)
                step_mean += hits / len(rec.truth)
            acc_sum += step_mean / len(logs)
        assert got == pytest.approx(acc_sum / (steps + 1), abs=1e-12)

    def test_permutation_invariance(self, rng):
        n = 30
        truth = rng.integers(0, 4, n)
        pred = rng.integers(0, 4, n)
        perm = rng.permutation(n)
        a = make_log(0, [pred], truth)
        b = make_log(0, [pred[perm]], truth[perm])
        assert ave_sa([a], 0) == ave_sa([b], 0)

    def test_monotone_under_pointwise_improvement(self, rng):
        truth = rng.integers(0, 4, 20)
        pred = rng.integers(0, 4, 20)
        wrong = np.flatnonzero(pred != truth)
        if wrong.size == 0:
            return
        improved = pred.copy()
        improved[wrong[0]] = truth[wrong[0]]
        a = ave_sa([make_log(0, [pred], truth)], 0)
        b = ave_sa([make_log(0, [improved], truth)], 0)
        assert b > a


class TestConfusionMatrix:
    def test_perfect_predictions_are_diagonal(self):
        m = confusion_matrix([0, 1, 2, 1], [0, 1, 2, 1], 3)
        assert np.array_equal(m, np.diag([1, 2, 1]))

    def test_total_is_sample_count(self, rng):
        truth = rng.integers(0, 5, 37)
        pred = rng.integers(0, 5, 37)
        assert confusion_matrix(truth, pred, 5).sum() == 37

    def test_hand_case(self):
        m = confusion_matrix([0, 0, 1], [0, 1, 1], 2)
        assert np.array_equal(m, np.array([[1, 1], [0, 1]]))

    def test_row_sums_are_class_counts(self, rng):
        truth = rng.integers(0, 4, 50)
        pred = rng.integers(0, 4, 50)
        m = confusion_matrix(truth, pred, 4)
        np.testing.assert_array_equal(m.sum(axis=1), np.bincount(truth, minlength=4))

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            confusion_matrix([0, 3], [0, 1], 3)


class TestReports:
    def test_step_csv_shape(self, tmp_path):
        truth = [0, 1]
        logs = [make_log(0, [[0, 1], [0, 0]], truth)]
        rows = battery_step_table(logs)
        write_step_csv(tmp_path / "steps.csv", rows)
        lines = (tmp_path / "steps.csv").read_text().splitlines()
        assert lines[0] == "step,aveSA_new,aveSA_all"
        assert lines[1].startswith("0,,")  # no new-class value at step 0
        assert len(lines) == 3

    def test_summary_reports_both_toggles(self, tmp_path):
        truth = [0, 1]
        logs = [make_log(0, [[0, 1], [0, 0]], truth)]
        summary = write_summary_json(tmp_path / "s.json", logs)
        assert "overall_accuracy_new" in summary
        assert set(summary["overall_accuracy_all"]) == {"with_step0", "without_step0"}
