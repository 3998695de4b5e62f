"""Partition agreement scores: adjusted Rand index and normalized mutual information."""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError


def _check_pair(a, b):
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    if a.shape != b.shape:
        raise InvalidInputError(f"labelings differ in length: {a.size} vs {b.size}")
    if a.size == 0:
        raise InvalidInputError("labelings are empty")
    return a, b


def contingency(a, b) -> np.ndarray:
    """Counts ``C[i, j]`` of points in class i of ``a`` and class j of ``b``."""
    a, b = _check_pair(a, b)
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    return table


def _comb2(x):
    x = np.asarray(x, dtype=np.int64)
    return x * (x - 1) // 2


def ari(a, b) -> float:
    """Adjusted Rand index (Hubert and Arabie) between two labelings."""
    table = contingency(a, b)
    n = int(table.sum())
    sum_ij = int(_comb2(table).sum())
    sum_a = int(_comb2(table.sum(axis=1)).sum())
    sum_b = int(_comb2(table.sum(axis=0)).sum())
    total = n * (n - 1) // 2
    if total == 0:
        return 1.0
    expected = sum_a * sum_b / total
    max_index = (sum_a + sum_b) / 2
    if max_index == expected:
        # both partitions trivial in the same way (all-singletons or one class)
        return 1.0
    return float((sum_ij - expected) / (max_index - expected))


def _entropy(counts, n):
    p = counts[counts > 0] / n
    return float(-np.sum(p * np.log(p)))


def nmi(a, b) -> float:
    """Mutual information normalized by the arithmetic mean of the two entropies.

    A pair of single-class labelings scores 1; a single-class labeling against
    anything else scores 0.
    """
    table = contingency(a, b)
    n = table.sum()
    ha = _entropy(table.sum(axis=1), n)
    hb = _entropy(table.sum(axis=0), n)
    if ha == 0 and hb == 0:
        return 1.0
    if ha == 0 or hb == 0:
        return 0.0
    nz = table > 0
    if table.shape[0] == table.shape[1] and np.all(nz.sum(axis=0) == 1) and np.all(nz.sum(axis=1) == 1):
        # partitions equal up to renaming: MI equals both entropies exactly
        return 1.0
    pij = table[nz] / n
    outer = np.outer(table.sum(axis=1), table.sum(axis=0))[nz] / n**2
    mi = float(np.sum(pij * np.log(pij / outer)))
    return float(min(1.0, max(0.0, mi / ((ha + hb) / 2))))
