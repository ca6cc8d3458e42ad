"""Rank-based ROC-AUC."""
from __future__ import annotations

import numpy as np
from scipy.stats import spearmanr

from .errors import MetricError


def _doubled_average_ranks(scores: np.ndarray) -> np.ndarray:
    """Twice the 1-based average ranks, as exact integers."""
    order = np.argsort(scores, kind="mergesort")
    s = scores[order]
    n = len(s)
    # boundaries of tie groups in sorted order
    starts = np.flatnonzero(np.r_[True, s[1:] != s[:-1]])
    ends = np.r_[starts[1:], n]
    # average rank of positions start..end-1 (1-based) is (start + 1 + end) / 2
    group_rank2 = starts + 1 + ends
    ranks2 = np.empty(n, dtype=np.int64)
    ranks2[order] = np.repeat(group_rank2, ends - starts)
    return ranks2


def roc_auc(scores, labels) -> float:
    """Probability a random positive outscores a random negative, ties counting one half.

    Computed from average ranks in O(n log n). Raises MetricError when only
    one class is present.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise MetricError(f"scores and labels must be 1-d and equally long, got {s.shape} and {y.shape}")
    if np.isnan(s).any():
        raise MetricError("scores contain NaN")
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricError("AUC is undefined for single-class labels")
    ranks2 = _doubled_average_ranks(s)
    # 2U = sum of doubled positive ranks - n_pos (n_pos + 1)
    u2 = int(ranks2[pos].sum()) - n_pos * (n_pos + 1)
    return u2 / (2 * n_pos * n_neg)


def spearman(x, y) -> float:
    return float(spearmanr(x, y).statistic)
