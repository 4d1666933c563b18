"""Round-level metrics."""

from __future__ import annotations

import numpy as np
from scipy.stats import rankdata

from .selection import LabeledSet


def in_ratio(query: LabeledSet) -> float:
    """Fraction of a query set that turned out to be in-distribution."""
    n = len(query)
    if n == 0:
        raise ValueError("empty query")
    return len(query.in_items) / n


def auroc(scores, is_positive) -> float:
    """Area under the ROC curve via the Mann-Whitney U statistic.

    Ties between a positive and a negative count one half.
    """
    s = np.asarray(scores, dtype=float)
    pos = np.asarray(is_positive, dtype=bool)
    if s.shape != pos.shape:
        raise ValueError("scores and labels differ in shape")
    n_pos = int(pos.sum())
    n_neg = len(pos) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("auroc needs both positive and negative labels")
    ranks = rankdata(s)  # average ranks for ties
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))
