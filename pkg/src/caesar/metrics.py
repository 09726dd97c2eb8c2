"""Binary classification metrics: AUC, KS, F1 and recall at 90% precision."""

from __future__ import annotations

import numpy as np
from scipy.stats import rankdata


class MetricError(ValueError):
    pass


def _check(scores, labels):
    s = np.clip(np.asarray(scores, dtype=np.float64).ravel(), 0.0, 1.0)
    y = np.asarray(labels).ravel()
    if s.shape != y.shape:
        raise MetricError("scores and labels differ in length")
    if not np.all((y == 0) | (y == 1)):
        raise MetricError("labels must be binary 0/1")
    y = y.astype(np.int64)
    pos = int(y.sum())
    if pos == 0 or pos == y.size:
        raise MetricError("AUC is undefined for single-class labels")
    return s, y


def auc(scores, labels) -> float:
    """Mann-Whitney rank statistic; tied pairs count one half."""
    s, y = _check(scores, labels)
    r = rankdata(s)
    pos = int(y.sum())
    neg = y.size - pos
    return float((r[y == 1].sum() - pos * (pos + 1) / 2) / (pos * neg))


def ks(scores, labels) -> float:
    """Largest gap between the score CDFs of the two classes."""
    s, y = _check(scores, labels)
    t = np.unique(s)
    cdf_pos = np.searchsorted(np.sort(s[y == 1]), t, side="right") / int(y.sum())
    cdf_neg = np.searchsorted(np.sort(s[y == 0]), t, side="right") / int((1 - y).sum())
    return float(np.max(np.abs(cdf_pos - cdf_neg)))


def f1_at(scores, labels, threshold: float = 0.5) -> float:
    s, y = _check(scores, labels)
    pred = s >= threshold
    tp = int(np.sum(pred & (y == 1)))
    fp = int(np.sum(pred & (y == 0)))
    fn = int(np.sum(~pred & (y == 1)))
    return 0.0 if tp == 0 else 2 * tp / (2 * tp + fp + fn)


def recall_at_precision(scores, labels, min_precision: float = 0.9) -> float:
    """Best recall over thresholds ``s >= t`` whose precision reaches the target."""
    s, y = _check(scores, labels)
    order = np.argsort(-s, kind="stable")
    ss, yy = s[order], y[order]
    tp = np.cumsum(yy)
    k = np.arange(1, ss.size + 1)
    # only cut at the last index of each tie group
    last = np.r_[ss[1:] != ss[:-1], True]
    prec = tp / k
    ok = last & (prec >= min_precision)
    if not ok.any():
        return 0.0
    return float(tp[ok].max() / y.sum())


def evaluate(scores, labels) -> dict:
    return {
        "auc": auc(scores, labels),
        "ks": ks(scores, labels),
        "f1": f1_at(scores, labels),
        "recall_at_0.9_precision": recall_at_precision(scores, labels),
    }
