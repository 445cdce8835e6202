"""
Row sets as Python ints and the global list of split candidates

Bit i of a mask is row i of the training set. A candidate (S, b) is stored
with the mask of rows it sends RIGHT, i.e. rows with sum_{f in S} x_f >= b+1.
"""
from dataclasses import dataclass
from itertools import combinations
from typing import List, Optional, Tuple

import numpy as np
from loguru import logger

from src.ruletree.data.dataset import BinaryDataset


def column_mask(column: np.ndarray) -> int:
    """Int whose bit i is set iff column[i] is nonzero"""
    packed = np.packbits(np.asarray(column, dtype=bool), bitorder="little")
    return int.from_bytes(packed.tobytes(), "little")


def feature_masks(data: BinaryDataset) -> List[int]:
    return [column_mask(data.x[:, f]) for f in range(data.n_features)]


def class_masks(data: BinaryDataset) -> List[int]:
    return [column_mask(data.y == k) for k in range(data.n_classes)]


def full_mask(n: int) -> int:
    return (1 << n) - 1


@dataclass(frozen=True)
class Candidate:
    """Split (S, b) with its precomputed right-going row mask"""

    features: Tuple[int, ...]
    threshold: int
    right: int

    @property
    def order_key(self) -> Tuple:
        return (len(self.features), self.features, self.threshold)


def enumerate_candidates(
    masks: List[int],
    n: int,
    f_max: int,
    fixed_threshold: Optional[int] = None,
) -> List[Candidate]:
    """
    Every (S, b) with 1 <= |S| <= f_max and 0 <= b < |S|, ordered by (|S|, S, b)

    Args:
        masks: Per-feature row masks
        n: Number of rows
        f_max: Largest feature-set size
        fixed_threshold: When set, only b == fixed_threshold is generated

    Returns:
        Candidates in canonical order
    """
    everything = full_mask(n)
    candidates: List[Candidate] = []
    for size in range(1, min(f_max, len(masks)) + 1):
        for subset in combinations(range(len(masks)), size):
            # at_least[j]: rows with at least j of the subset's features set
            at_least = [everything] + [0] * size
            for f in subset:
                m = masks[f]
                for j in range(size, 0, -1):
                    at_least[j] |= at_least[j - 1] & m
            for b in range(size):
                if fixed_threshold is not None and b != fixed_threshold:
                    continue
                candidates.append(Candidate(subset, b, at_least[b + 1]))
    logger.debug(f"Enumerated {len(candidates)} split candidates over {len(masks)} features")
    return candidates


def count_candidates(n_features: int, f_max: int, fixed_threshold: Optional[int] = None) -> int:
    """Number of candidates enumerate_candidates would produce"""
    from math import comb

    total = 0
    for size in range(1, min(f_max, n_features) + 1):
        if fixed_threshold is None:
            total += comb(n_features, size) * size
        elif fixed_threshold < size:
            total += comb(n_features, size)
    return total
