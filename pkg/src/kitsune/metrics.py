"""Detection metrics over labeled anomaly scores.

Scores follow the convention "alert iff score >= threshold". Labels are
booleans or 0/1 with 1 (True) meaning attack.
"""

import numpy as np
from scipy.stats import rankdata

__all__ = ["auc", "eer", "parse_labels", "rate_at_fpr", "report", "roc_sweep"]

_ATTACK_NAMES = {"1", "attack", "malicious", "anomaly", "true"}
_NORMAL_NAMES = {"0", "normal", "benign", "false"}


def parse_labels(values):
    """Map label strings or numbers to a boolean array (True = attack)."""
    out = []
    for v in values:
        key = str(v).strip().lower()
        if key in _ATTACK_NAMES:
            out.append(True)
        elif key in _NORMAL_NAMES:
            out.append(False)
        else:
            try:
                out.append(float(key) != 0.0)
            except ValueError:
                raise ValueError(f"unrecognized label {v!r}") from None
    return np.array(out, dtype=bool)


def _prepare(scores, labels):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be 1-D and of equal length")
    n_pos = int(labels.sum())
    if n_pos == 0 or n_pos == len(labels):
        raise ValueError("both normal and attack labels are required")
    return scores, labels


def auc(scores, labels):
    """Probability that an attack outranks a normal instance, ties counting half."""
    scores, labels = _prepare(scores, labels)
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    ranks = rankdata(scores)
    u = ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def roc_sweep(scores, labels):
    """Rates at every candidate threshold.

    Thresholds are the distinct scores in increasing order followed by
    ``+inf`` (no alerts). Returns ``(thresholds, fpr, tpr)``.
    """
    scores, labels = _prepare(scores, labels)
    thresholds = np.append(np.unique(scores), np.inf)
    pos = np.sort(scores[labels])
    neg = np.sort(scores[~labels])
    # count of scores >= t is len - (number strictly below t)
    tpr = (len(pos) - np.searchsorted(pos, thresholds, side="left")) / len(pos)
    fpr = (len(neg) - np.searchsorted(neg, thresholds, side="left")) / len(neg)
    return thresholds, fpr, tpr


def eer(scores, labels):
    """Equal error rate, linearly interpolated between adjacent thresholds."""
    _, fpr, tpr = roc_sweep(scores, labels)
    fnr = 1.0 - tpr
    diff = fnr - fpr  # increases from <= 0 (lowest threshold) to >= 0 (+inf)
    hit = np.flatnonzero(diff == 0)
    if hit.size:
        return float(fpr[hit[0]])
    j = int(np.argmax(diff > 0))
    i = j - 1
    alpha = -diff[i] / (diff[j] - diff[i])
    return float(fpr[i] + alpha * (fpr[j] - fpr[i]))


def rate_at_fpr(scores, labels, target_fpr):
    """Smallest candidate threshold with empirical FPR <= ``target_fpr``.

    Returns ``(threshold, tpr, fnr)``. ``target_fpr = 0`` gives the strictest
    operating point with no false alarms.
    """
    if not 0 <= target_fpr < 1:
        raise ValueError("target_fpr must be in [0, 1)")
    thresholds, fpr, tpr = roc_sweep(scores, labels)
    i = int(np.argmax(fpr <= target_fpr))
    return float(thresholds[i]), float(tpr[i]), float(1.0 - tpr[i])


def report(scores, labels, target_fpr=0.001):
    """Summary dictionary with AUC, EER and rates at ``target_fpr`` and at zero FPR."""
    scores, labels = _prepare(scores, labels)
    thr, tpr, fnr = rate_at_fpr(scores, labels, target_fpr)
    thr0, tpr0, _ = rate_at_fpr(scores, labels, 0.0)
    n_pos = int(labels.sum())
    return {
        "n": int(len(scores)),
        "attacks": n_pos,
        "auc": auc(scores, labels),
        "eer": eer(scores, labels),
        "target_fpr": target_fpr,
        "threshold": thr,
        "tpr": tpr,
        "fnr": fnr,
        "zero_fpr_threshold": thr0,
        "zero_fpr_tp": int(round(tpr0 * n_pos)),
    }
