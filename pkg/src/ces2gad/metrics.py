"""Binary classification metrics: F1-macro and ROC AUC."""

from __future__ import annotations

import numpy as np
from scipy.stats import rankdata

from .exceptions import DegenerateInputError, DimensionMismatchError


def _pair(a, b):
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    if a.shape != b.shape:
        raise DimensionMismatchError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    if a.size == 0:
        raise DegenerateInputError("metrics need at least one sample")
    return a, b


def confusion_counts(predictions, labels) -> dict:
    """Counts ``tp``/``fp``/``tn``/``fn`` with class 1 as positive."""
    p, y = _pair(predictions, labels)
    p = p.astype(bool)
    y = y.astype(bool)
    return {
        "tp": int(np.sum(p & y)),
        "fp": int(np.sum(p & ~y)),
        "tn": int(np.sum(~p & ~y)),
        "fn": int(np.sum(~p & y)),
    }


def _f1(tp: int, fp: int, fn: int) -> float:
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def f1_macro(predictions, labels) -> float:
    """Unweighted mean of the F1 of class 0 and class 1 (0 when undefined)."""
    c = confusion_counts(predictions, labels)
    f1_pos = _f1(c["tp"], c["fp"], c["fn"])
    f1_neg = _f1(c["tn"], c["fn"], c["fp"])
    return (f1_pos + f1_neg) / 2


def auc(scores, labels) -> float:
    """Probability that a random positive outscores a random negative, ties
    counting one half. Computed from mid-ranks."""
    s, y = _pair(scores, labels)
    y = y.astype(bool)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateInputError("AUC needs at least one positive and one negative")
    ranks = rankdata(s.astype(np.float64))
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2
    return float(u / (n_pos * n_neg))
