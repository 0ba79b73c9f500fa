"""Evaluation metrics: accuracy, confusion matrix, AUC-ROC, AUC-PR, MAE."""

from __future__ import annotations

import numpy as np

from .errors import UndefinedMetricError, ValidationError


def _check_pair(true, pred):
    t = np.asarray(true, dtype=np.int64)
    p = np.asarray(pred, dtype=np.int64)
    if t.shape != p.shape or t.ndim != 1:
        raise ValidationError("labels", f"length mismatch: {t.shape} vs {p.shape}")
    return t, p


def confusion(true, pred, k: int) -> np.ndarray:
    """K x K counts; rows are true classes, columns predictions."""
    t, p = _check_pair(true, pred)
    if t.size and (t.min() < 0 or t.max() >= k or p.min() < 0 or p.max() >= k):
        raise ValidationError("labels", f"labels out of range for K={k}")
    m = np.zeros((k, k), dtype=np.int64)
    np.add.at(m, (t, p), 1)
    return m


def accuracy(true, pred) -> float:
    t, p = _check_pair(true, pred)
    if t.size == 0:
        raise ValidationError("labels", "empty label arrays")
    return float((t == p).mean())


def mae(true, pred) -> float:
    t, p = _check_pair(true, pred)
    if t.size == 0:
        raise ValidationError("labels", "empty label arrays")
    return float(np.abs(t - p).mean())


def _check_binary(scores, labels):
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1 or s.size == 0:
        raise ValidationError("scores", f"bad shapes: {s.shape} vs {y.shape}")
    uniq = set(np.unique(y).tolist())
    if not uniq <= {0, 1}:
        raise ValidationError("labels", f"binary labels expected, got {sorted(uniq)}")
    if uniq != {0, 1}:
        raise UndefinedMetricError("both classes must be present")
    return s, y.astype(np.int64)


def auc_roc(scores, labels) -> float:
    """Rank statistic: P(score_pos > score_neg) + 0.5 P(equal).

    Computed from average ranks, which handles ties exactly.
    """
    s, y = _check_binary(scores, labels)
    order = np.argsort(s, kind="stable")
    ranks = np.empty(s.size, dtype=np.float64)
    sorted_s = s[order]
    i = 0
    while i < s.size:
        j = i
        while j + 1 < s.size and sorted_s[j + 1] == sorted_s[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0  # average 1-based rank
        i = j + 1
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    rank_sum = ranks[y == 1].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def auc_pr(scores, labels) -> float:
    """Average precision: sum over threshold steps of precision * delta-recall."""
    s, y = _check_binary(scores, labels)
    order = np.argsort(-s, kind="stable")
    y_sorted = y[order]
    s_sorted = s[order]
    tp = np.cumsum(y_sorted)
    fp = np.cumsum(1 - y_sorted)
    # keep only the last index of each tied score group (threshold points)
    last_of_group = np.ones(s.size, dtype=bool)
    last_of_group[:-1] = s_sorted[1:] != s_sorted[:-1]
    tp = tp[last_of_group].astype(np.float64)
    fp = fp[last_of_group].astype(np.float64)
    n_pos = float(y.sum())
    precision = tp / (tp + fp)
    recall = tp / n_pos
    prev_recall = np.concatenate([[0.0], recall[:-1]])
    return float(np.sum((recall - prev_recall) * precision))


def evaluation_report(true, pred, k: int, scores=None) -> dict:
    """JSON-ready report; AUCs included for binary tasks when scores given."""
    report = {
        "accuracy": accuracy(true, pred),
        "mae": mae(true, pred),
        "confusion": confusion(true, pred, k).tolist(),
        "count": int(np.asarray(true).size),
    }
    if k == 2 and scores is not None:
        report["auc_roc"] = auc_roc(scores, true)
        report["auc_pr"] = auc_pr(scores, true)
    return report
