"""Pixel-count segmentation metrics.

Inputs may be probabilities or binary masks; both sides are thresholded
at 0.5 before counting.
"""

from __future__ import annotations

import numpy as np

from ..exceptions import ShapeError


def confusion_counts(pred, target) -> tuple[int, int, int, int]:
    """(tp, fp, fn, tn) over all pixels."""
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise ShapeError(f"masks disagree: {pred.shape} vs {target.shape}")
    if pred.size == 0:
        raise ShapeError("metrics are undefined on empty masks")
    p = pred >= 0.5
    t = target >= 0.5
    tp = int(np.count_nonzero(p & t))
    fp = int(np.count_nonzero(p & ~t))
    fn = int(np.count_nonzero(~p & t))
    tn = pred.size - tp - fp - fn
    return tp, fp, fn, tn


def overall_accuracy(pred, target) -> float:
    tp, fp, fn, tn = confusion_counts(pred, target)
    return (tp + tn) / (tp + fp + fn + tn)


def iou(pred, target) -> float:
    """Intersection over union of the positive class; 1.0 when both empty."""
    tp, fp, fn, _ = confusion_counts(pred, target)
    union = tp + fp + fn
    return 1.0 if union == 0 else tp / union
