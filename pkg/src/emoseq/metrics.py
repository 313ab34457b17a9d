"""Evaluation metrics: confusion counts, unweighted accuracy, macro F1, MSE.

Unweighted accuracy is the mean of per-class recalls over classes that
actually occur, which makes it insensitive to class imbalance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DataError, DimensionError, EmptyInputError


@dataclass(frozen=True)
class ConfusionMatrix:
    """counts[true, predicted]; total equals the number of scored items."""

    counts: np.ndarray

    def __post_init__(self):
        c = self.counts
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise DimensionError(f"confusion matrix must be square, got {c.shape}")
        if np.any(c < 0):
            raise DataError("confusion counts must be non-negative")

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion_from_pairs(true_labels, predicted_labels, n_classes: int) -> ConfusionMatrix:
    t = np.asarray(true_labels, dtype=np.intp)
    p = np.asarray(predicted_labels, dtype=np.intp)
    if t.shape != p.shape:
        raise DimensionError(f"label arrays differ in length: {t.shape} vs {p.shape}")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (t, p), 1)
    return ConfusionMatrix(counts=counts)


def unweighted_accuracy(cm: ConfusionMatrix) -> float:
    """Mean per-class recall; classes with no true examples are excluded."""
    counts = cm.counts.astype(np.float64)
    row_sums = counts.sum(axis=1)
    present = row_sums > 0
    if cm.total == 0 or not present.any():
        raise EmptyInputError("confusion matrix has no scored examples")
    recalls = np.diag(counts)[present] / row_sums[present]
    return float(recalls.mean())


def macro_f1(cm: ConfusionMatrix) -> float:
    """Mean per-class F1; a class with no true and no predicted items scores 0."""
    counts = cm.counts.astype(np.float64)
    if cm.total == 0 or not (counts.sum(axis=1) > 0).any():
        raise EmptyInputError("confusion matrix has no scored examples")
    tp = np.diag(counts)
    denom = counts.sum(axis=1) + counts.sum(axis=0)  # 2*tp + fp + fn
    f1 = np.where(denom > 0, 2.0 * tp / np.maximum(denom, 1e-300), 0.0)
    return float(f1.mean())


def mse(predictions, targets) -> float:
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if p.shape != t.shape:
        raise DimensionError(f"length mismatch: {p.shape} vs {t.shape}")
    if p.size == 0:
        raise EmptyInputError("cannot compute MSE of zero values")
    return float(np.mean((p - t) ** 2))


def metrics_report(cm: ConfusionMatrix, arousal_pred, arousal_true, valence_pred, valence_true) -> dict:
    return {
        "unweighted_accuracy": unweighted_accuracy(cm),
        "macro_f1": macro_f1(cm),
        "mse_arousal": mse(arousal_pred, arousal_true),
        "mse_valence": mse(valence_pred, valence_true),
        "confusion": cm.counts.astype(int).tolist(),
    }


def report_to_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"
