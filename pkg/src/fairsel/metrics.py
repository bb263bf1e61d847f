"""Accuracy, fairness-violation metrics, and selection-quality statistics.

Fairness metrics are binary (positive class = 1, groups 0/1). Degenerate
cases return NaN rather than raising, mirroring how result tables mark
invalid measures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import InputError

INVALID = math.nan


def is_valid(value: float) -> bool:
    return not math.isnan(value)


def _positive_rate(predictions, mask) -> float:
    if not mask.any():
        return INVALID
    return float(np.mean(predictions[mask] == 1))


def accuracy(predictions, labels) -> float:
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if len(predictions) == 0:
        raise InputError("empty prediction set")
    return float(np.mean(predictions == labels))


def delta_dp(predictions, groups) -> float:
    """Demographic parity gap: |P(Yhat=1|S=1) - P(Yhat=1|S=0)|."""
    predictions = np.asarray(predictions)
    groups = np.asarray(groups)
    r0 = _positive_rate(predictions, groups == 0)
    r1 = _positive_rate(predictions, groups == 1)
    if not (is_valid(r0) and is_valid(r1)):
        return INVALID
    return abs(r1 - r0)


def delta_deo(predictions, labels, groups) -> float:
    """True-positive-rate gap; NaN when either group has no positives."""
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    groups = np.asarray(groups)
    t0 = _positive_rate(predictions, (groups == 0) & (labels == 1))
    t1 = _positive_rate(predictions, (groups == 1) & (labels == 1))
    if not (is_valid(t0) and is_valid(t1)):
        return INVALID
    return abs(t1 - t0)


def p_percent_rule(predictions, groups) -> float:
    """min of the two positive-rate ratios; NaN when either rate is 0."""
    predictions = np.asarray(predictions)
    groups = np.asarray(groups)
    r0 = _positive_rate(predictions, groups == 0)
    r1 = _positive_rate(predictions, groups == 1)
    if not (is_valid(r0) and is_valid(r1)) or r0 == 0.0 or r1 == 0.0:
        return INVALID
    return min(r0 / r1, r1 / r0)


def discriminated_selection_rate(selected) -> float:
    """Fraction of selected examples whose observed label was flipped."""
    if not selected:
        raise InputError("no selected examples")
    flips = 0
    for ex in selected:
        if not ex.has_clean_label:
            raise InputError(f"example {ex.id} has no clean label")
        flips += ex.y_observed != ex.z_clean
    return flips / len(selected)


def epochs_to_target(accuracies, target: float):
    """1-based index of the first epoch reaching the target accuracy,
    or None when it is never reached."""
    if len(accuracies) == 0:
        raise InputError("empty metrics log")
    for i, a in enumerate(accuracies, start=1):
        if a >= target:
            return i
    return None


def predict_classes(class_probs: np.ndarray) -> np.ndarray:
    """argmax with ties going to the lower class index."""
    return np.argmax(class_probs, axis=-1)


@dataclass
class EvalReport:
    accuracy: float
    delta_dp: float
    delta_deo: float
    p_percent: float
    positive_rates: tuple
    tprs: tuple


def evaluate(class_probs: np.ndarray, clean_labels, groups) -> EvalReport:
    """Full report against clean labels (fair-distribution evaluation)."""
    preds = predict_classes(class_probs)
    labels = np.asarray(clean_labels)
    groups = np.asarray(groups)
    return EvalReport(
        accuracy=accuracy(preds, labels),
        delta_dp=delta_dp(preds, groups),
        delta_deo=delta_deo(preds, labels, groups),
        p_percent=p_percent_rule(preds, groups),
        positive_rates=(_positive_rate(preds, groups == 0),
                        _positive_rate(preds, groups == 1)),
        tprs=(_positive_rate(preds, (groups == 0) & (labels == 1)),
              _positive_rate(preds, (groups == 1) & (labels == 1))),
    )
