"""External clustering metrics: accuracy under the best label matching, NMI, ARI."""
from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InvalidInput


def _pair(pred, truth):
    pred = np.asarray(pred).ravel()
    truth = np.asarray(truth).ravel()
    if pred.shape != truth.shape:
        raise InvalidInput(f"label arrays differ in length: {pred.size} vs {truth.size}")
    if pred.size == 0:
        raise InvalidInput("empty label arrays")
    return pred, truth


def contingency(pred, truth) -> np.ndarray:
    """Counts[i, j] = #points with the i-th predicted and j-th true label (sorted unique values)."""
    pred, truth = _pair(pred, truth)
    _, pi = np.unique(pred, return_inverse=True)
    _, ti = np.unique(truth, return_inverse=True)
    C = np.zeros((pi.max() + 1, ti.max() + 1), dtype=np.int64)
    np.add.at(C, (pi, ti), 1)
    return C


def accuracy(pred, truth) -> float:
    C = contingency(pred, truth)
    size = max(C.shape)
    padded = np.zeros((size, size), dtype=np.int64)
    padded[: C.shape[0], : C.shape[1]] = C
    rows, cols = linear_sum_assignment(padded, maximize=True)
    return float(padded[rows, cols].sum()) / float(C.sum())


def _entropy(counts, n):
    p = counts[counts > 0] / n
    return float(-(p * np.log(p)).sum())


def nmi(pred, truth) -> float:
    """Mutual information over the geometric mean of the two entropies (natural log)."""
    C = contingency(pred, truth).astype(np.float64)
    n = C.sum()
    a, b = C.sum(1), C.sum(0)
    h_pred, h_true = _entropy(a, n), _entropy(b, n)
    nz = C > 0
    mi = float((C[nz] / n * np.log(C[nz] * n / np.outer(a, b)[nz])).sum())
    denom = np.sqrt(h_pred * h_true)
    if denom == 0.0:
        return 0.0
    return float(min(max(mi / denom, 0.0), 1.0))


def _comb2(x):
    x = np.asarray(x, dtype=np.float64)
    return x * (x - 1.0) / 2.0


def ari(pred, truth) -> float:
    C = contingency(pred, truth)
    n = C.sum()
    sum_ij = _comb2(C).sum()
    sum_a = _comb2(C.sum(1)).sum()
    sum_b = _comb2(C.sum(0)).sum()
    total = _comb2(n)
    if total == 0:
        return 1.0
    expected = sum_a * sum_b / total
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        # both partitions trivial (all singletons or one cluster): identical up to relabeling
        return 1.0
    return float((sum_ij - expected) / (max_index - expected))


def evaluate(pred, truth) -> dict:
    return {"acc": accuracy(pred, truth), "nmi": nmi(pred, truth), "ari": ari(pred, truth)}
