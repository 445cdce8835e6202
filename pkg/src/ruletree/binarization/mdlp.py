"""
Entropy-based supervised discretization with the MDL stopping rule
"""
import math
from typing import List, Sequence, Tuple

import numpy as np
from scipy.stats import entropy

from src.ruletree.exceptions import BinarizationError

# Weighted entropies closer than this are treated as ties (smallest threshold wins)
ENTROPY_TIE_TOL = 1e-12


def class_entropy(counts: np.ndarray) -> float:
    """Base-2 entropy of a class-count vector; 0*log(0) = 0"""
    total = counts.sum()
    if total == 0:
        return 0.0
    return float(entropy(counts[counts > 0], base=2))


def _boundaries(values: np.ndarray, labels: np.ndarray) -> List[int]:
    """
    Candidate cut positions in a sorted slice

    Position j means "cut between values[j-1] and values[j]". Only positions
    between distinct values are returned, and a position is skipped when the
    two adjacent value groups carry one and the same single class.
    """
    positions = np.flatnonzero(values[1:] != values[:-1]) + 1
    if len(positions) == 0:
        return []
    starts = np.concatenate(([0], positions))
    ends = np.concatenate((positions, [len(values)]))
    group_classes = [frozenset(labels[s:e].tolist()) for s, e in zip(starts, ends)]
    result = []
    for g, pos in enumerate(positions):
        left, right = group_classes[g], group_classes[g + 1]
        if len(left) == 1 and left == right:
            continue
        result.append(int(pos))
    return result


def _accept(counts: np.ndarray, left: np.ndarray, right: np.ndarray) -> bool:
    """MDL acceptance test for a binary partition"""
    n = counts.sum()
    n1, n2 = left.sum(), right.sum()
    ent = class_entropy(counts)
    ent1 = class_entropy(left)
    ent2 = class_entropy(right)
    gain = ent - (n1 / n) * ent1 - (n2 / n) * ent2
    k = int((counts > 0).sum())
    k1 = int((left > 0).sum())
    k2 = int((right > 0).sum())
    delta = math.log2(3 ** k - 2) - (k * ent - k1 * ent1 - k2 * ent2)
    return gain > (math.log2(n - 1) + delta) / n


def _split_slice(values: np.ndarray, labels: np.ndarray, n_classes: int) -> List[float]:
    n = len(values)
    if n < 2:
        return []
    candidates = _boundaries(values, labels)
    if not candidates:
        return []

    onehot = np.zeros((n, n_classes), dtype=np.int64)
    onehot[np.arange(n), labels] = 1
    prefix = np.cumsum(onehot, axis=0)
    counts = prefix[-1]

    best_pos, best_ent = None, math.inf
    for pos in candidates:
        left = prefix[pos - 1]
        right = counts - left
        weighted = (pos / n) * class_entropy(left) + ((n - pos) / n) * class_entropy(right)
        if weighted < best_ent - ENTROPY_TIE_TOL:
            best_pos, best_ent = pos, weighted

    left = prefix[best_pos - 1]
    if not _accept(counts, left, counts - left):
        return []
    cut = (values[best_pos - 1] + values[best_pos]) / 2.0
    return (
        _split_slice(values[:best_pos], labels[:best_pos], n_classes)
        + [float(cut)]
        + _split_slice(values[best_pos:], labels[best_pos:], n_classes)
    )


def mdlp_cuts(values: Sequence[float], labels: Sequence[int]) -> List[float]:
    """
    Recursive entropy-minimizing cuts accepted by the MDL criterion

    Args:
        values: Real feature values
        labels: Class ids aligned with values

    Returns:
        Strictly increasing list of cut thresholds (midpoints)
    """
    values = np.asarray(values, dtype=float)
    labels_arr = np.asarray(labels)
    if values.shape != labels_arr.shape:
        raise BinarizationError(f"values and labels differ in length ({len(values)} vs {len(labels_arr)})")
    if len(values) < 2:
        raise BinarizationError("MDLP needs at least two samples")

    _, dense = np.unique(labels_arr, return_inverse=True)
    order = np.argsort(values, kind="stable")
    sorted_values = values[order]
    sorted_labels = dense.reshape(-1)[order]
    n_classes = int(sorted_labels.max()) + 1
    return _split_slice(sorted_values, sorted_labels, n_classes)


def interval_index(cuts: Sequence[float], values: Sequence[float]) -> np.ndarray:
    """Interval id per value: 0 for v <= cuts[0], i for cuts[i-1] < v <= cuts[i], len(cuts) above"""
    return np.searchsorted(np.asarray(cuts, dtype=float), np.asarray(values, dtype=float), side="left")


def interval_bounds(cuts: Sequence[float]) -> List[Tuple[float, float]]:
    """Half-open (lo, hi] bounds of the intervals induced by cuts"""
    edges = [-math.inf] + list(cuts) + [math.inf]
    return list(zip(edges[:-1], edges[1:]))
