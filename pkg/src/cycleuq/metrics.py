"""Binary classification metrics: accuracy, F1, ROC-AUC (Mann-Whitney
form, ties count one half) and step-wise average precision (tied scores
collapse into one group)."""

import numpy as np

from .exceptions import DataError
from .validation import as_binary_labels


def _paired(pred, labels):
    p = np.asarray(pred)
    l = as_binary_labels(labels)
    if p.shape != l.shape:
        raise DataError(f"length mismatch: {p.shape} vs {l.shape}")
    return p, l


def accuracy(pred, labels) -> float:
    p, l = _paired(pred, labels)
    return float(np.mean(p == l))


def confusion_counts(pred, labels):
    """(tn, fp, fn, tp)."""
    p, l = _paired(as_binary_labels(pred), labels)
    tp = int(np.sum((p == 1) & (l == 1)))
    tn = int(np.sum((p == 0) & (l == 0)))
    fp = int(np.sum((p == 1) & (l == 0)))
    fn = int(np.sum((p == 0) & (l == 1)))
    return tn, fp, fn, tp


def f1(pred, labels) -> float:
    tn, fp, fn, tp = confusion_counts(pred, labels)
    denom = 2 * tp + fp + fn
    if denom == 0:
        return 0.0
    return 2.0 * tp / denom


def _average_ranks(scores: np.ndarray) -> np.ndarray:
    # 1-based ranks with ties averaged
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores))
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def roc_auc(scores, labels) -> float:
    """Probability a random positive outranks a random negative."""
    s = np.asarray(scores, dtype=np.float64)
    l = as_binary_labels(labels)
    if s.shape != l.shape:
        raise DataError(f"length mismatch: {s.shape} vs {l.shape}")
    n_pos = int(l.sum())
    n_neg = len(l) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("roc_auc needs both classes present")
    ranks = _average_ranks(s)
    u = float(ranks[l == 1].sum()) - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def average_precision(scores, labels) -> float:
    """Step-wise (non-interpolated) AP over descending scores."""
    s = np.asarray(scores, dtype=np.float64)
    l = as_binary_labels(labels)
    if s.shape != l.shape:
        raise DataError(f"length mismatch: {s.shape} vs {l.shape}")
    n_pos = int(l.sum())
    if n_pos == 0:
        raise DataError("average_precision needs at least one positive")
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    l_sorted = l[order]
    ap = 0.0
    tp = 0
    seen = 0
    i = 0
    while i < len(s_sorted):
        j = i
        while j + 1 < len(s_sorted) and s_sorted[j + 1] == s_sorted[i]:
            j += 1
        group_pos = int(l_sorted[i : j + 1].sum())
        tp += group_pos
        seen += j - i + 1
        if group_pos:
            ap += (tp / seen) * (group_pos / n_pos)
        i = j + 1
    return ap
