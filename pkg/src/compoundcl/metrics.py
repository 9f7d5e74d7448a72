"""Evaluation metrics over experiment logs: per-step accuracy, the
ordering-averaged step accuracy, its mean over all steps, and confusion
matrices."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import IncompleteLogError


@dataclass
class StepRecord:
    """Predictions on the test set after one continual step.

    Step 0 is the basic phase; later steps carry a mask of test samples
    belonging to that step's newly learned class.
    """

    step: int
    truth: np.ndarray
    pred: np.ndarray
    new_mask: np.ndarray | None = None
    label: str | None = None
    best_epoch: int = 0
    train_steps: int = 0


@dataclass
class RunLog:
    ordering_id: int
    ordering: list
    steps: list = field(default_factory=list)
    epochs: list = field(default_factory=list)  # per-epoch dict records

    def step_record(self, step: int) -> StepRecord:
        for rec in self.steps:
            if rec.step == step:
                return rec
        raise IncompleteLogError(f"ordering {self.ordering_id}: no record for step {step}")

    def max_step(self) -> int:
        if not self.steps:
            raise IncompleteLogError(f"ordering {self.ordering_id}: empty log")
        return max(r.step for r in self.steps)


def step_accuracy(truth, predictions) -> float:
    """Fraction of exact label matches."""
    truth = np.asarray(truth)
    predictions = np.asarray(predictions)
    if truth.shape != predictions.shape:
        raise ValueError(f"truth shape {truth.shape} != predictions shape {predictions.shape}")
    if truth.size == 0:
        raise ValueError("cannot score empty prediction vectors")
    return float(np.mean(truth == predictions))


def _select(rec: StepRecord, select: str):
    if select == "all":
        return rec.truth, rec.pred
    if select == "new":
        if rec.new_mask is None:
            raise IncompleteLogError(f"step {rec.step} has no new-class mask")
        return rec.truth[rec.new_mask], rec.pred[rec.new_mask]
    raise ValueError(f"select must be 'all' or 'new', got {select!r}")


def ave_sa(logs, step: int, select: str = "all") -> float:
    """Mean step accuracy over all orderings at one continual step."""
    if not logs:
        raise IncompleteLogError("no logs supplied")
    accs = []
    for log in logs:
        truth, pred = _select(log.step_record(step), select)
        accs.append(step_accuracy(truth, pred))
    return float(np.mean(accs))


def overall_accuracy(logs, include_step0: bool = True, select: str = "all") -> float:
    """Mean of ave_sa over steps.

    New-class scoring always starts at step 1 (step 0 has no new class).
    Ragged logs (orderings with different step sets) raise.
    """
    if not logs:
        raise IncompleteLogError("no logs supplied")
    last = logs[0].max_step()
    for log in logs[1:]:
        if log.max_step() != last:
            raise IncompleteLogError("logs cover different numbers of steps")
    first = 0 if (include_step0 and select == "all") else 1
    if last < first:
        raise IncompleteLogError("no steps to average")
    values = [ave_sa(logs, i, select=select) for i in range(first, last + 1)]
    return float(np.mean(values))


def confusion_matrix(truth, predictions, k: int) -> np.ndarray:
    """k x k counts; entry (a, b) counts truth-a samples predicted as b."""
    truth = np.asarray(truth, dtype=np.int64)
    predictions = np.asarray(predictions, dtype=np.int64)
    if truth.shape != predictions.shape:
        raise ValueError("truth and prediction lengths differ")
    if truth.size and (truth.min() < 0 or truth.max() >= k or predictions.min() < 0 or predictions.max() >= k):
        raise ValueError(f"labels out of range for k={k}")
    m = np.zeros((k, k), dtype=np.int64)
    np.add.at(m, (truth, predictions), 1)
    return m


def battery_step_table(logs) -> list:
    """Rows (step, aveSA_new, aveSA_all); step 0 has no new-class value."""
    last = logs[0].max_step()
    rows = []
    for i in range(0, last + 1):
        sa_all = ave_sa(logs, i, select="all")
        sa_new = ave_sa(logs, i, select="new") if i >= 1 else None
        rows.append((i, sa_new, sa_all))
    return rows


def write_step_csv(path, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write("step,aveSA_new,aveSA_all\n")
        for step, sa_new, sa_all in rows:
            new_txt = "" if sa_new is None else f"{sa_new:.10f}"
            f.write(f"{step},{new_txt},{sa_all:.10f}\n")


def write_summary_json(path, logs, include_step0: bool = True):
    """Overall accuracy as (new-class, all-class), under both step-0 toggles."""
    summary = {
        "orderings": len(logs),
        "steps": logs[0].max_step(),
        "include_step0_configured": include_step0,
        "overall_accuracy_new": overall_accuracy(logs, select="new"),
        "overall_accuracy_all": {
            "with_step0": overall_accuracy(logs, include_step0=True),
            "without_step0": overall_accuracy(logs, include_step0=False)
            if logs[0].max_step() >= 1
            else None,
        },
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")
    return summary


def write_confusion_csv(path, matrix: np.ndarray, labels=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    k = matrix.shape[0]
    names = list(labels) if labels is not None else [str(i) for i in range(k)]
    with open(path, "w", encoding="utf-8") as f:
        f.write("truth\\pred," + ",".join(names) + "\n")
        for i in range(k):
            f.write(names[i] + "," + ",".join(str(int(v)) for v in matrix[i]) + "\n")
