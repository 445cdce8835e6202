"""
Leaf labelling and exact objective values for the four objectives

The search minimises a loss; objective values are reported in each
model's own sense:

    accuracy          loss = errors/n + alpha*F                objective = loss
    cost_sensitive    loss = (C_FP*FP + C_FN*FN)/n + alpha*F   objective = loss
    balanced_accuracy loss = FN/(2n+) + FP/(2n-) + alpha*F     objective = 1 - loss
    f1                loss = -F1 + alpha*F                     objective = -loss
"""
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.ruletree.data.dataset import BinaryDataset
from src.ruletree.exceptions import ModelBuildError
from src.ruletree.metrics.metrics import accuracy, balanced_accuracy, confusion, f1, mec
from src.ruletree.mip.objective import Kind, ObjectiveKind
from src.ruletree.tree.params import HyperParams
from src.ruletree.tree.tree import BooleanTree, predict_all, route_all


def check_objective(data: BinaryDataset, obj: ObjectiveKind) -> None:
    """Reject objective/data combinations the formulations do not define"""
    if obj.binary_only and data.n_classes != 2:
        raise ModelBuildError(f"Objective {obj} requires exactly two classes, data has {data.n_classes}")
    if obj.kind in (Kind.BALANCED_ACCURACY, Kind.F1) and data.n_pos == 0:
        raise ModelBuildError(f"Objective {obj} needs at least one positive training sample")
    if obj.kind == Kind.BALANCED_ACCURACY and data.n_neg == 0:
        raise ModelBuildError("Balanced accuracy needs at least one negative training sample")


@dataclass(frozen=True)
class ScoringContext:
    """Training-set constants needed to score leaves and trees"""

    obj: ObjectiveKind
    n: int
    class_counts: Tuple[int, ...]
    alpha: Fraction
    _cache: Dict = field(default_factory=dict, compare=False, repr=False)

    @classmethod
    def build(cls, data: BinaryDataset, hp: HyperParams, obj: ObjectiveKind) -> "ScoringContext":
        check_objective(data, obj)
        return cls(obj=obj, n=data.n, class_counts=data.class_counts, alpha=hp.alpha_exact)

    @property
    def n_classes(self) -> int:
        return len(self.class_counts)

    @property
    def n_pos(self) -> int:
        return self.class_counts[1]

    @property
    def n_neg(self) -> int:
        return self.class_counts[0]

    @property
    def separable(self) -> bool:
        return self.obj.kind != Kind.F1

    def leaf(self, counts: Tuple[int, ...]) -> Tuple[int, Fraction]:
        """
        Objective-optimal label of a leaf and its loss contribution

        Ties go to the smallest class id; empty leaves get label 0.
        """
        hit = self._cache.get(counts)
        if hit is not None:
            return hit
        kind = self.obj.kind
        if kind == Kind.ACCURACY:
            best = max(counts)
            label = counts.index(best)
            result = (label, Fraction(sum(counts) - best, self.n))
        else:
            neg, pos = counts[0], counts[1]
            if kind == Kind.COST_SENSITIVE:
                cost0 = self.obj.cost_fn * pos / self.n
                cost1 = self.obj.cost_fp * neg / self.n
            elif kind == Kind.BALANCED_ACCURACY:
                cost0 = Fraction(pos, 2 * self.n_pos)
                cost1 = Fraction(neg, 2 * self.n_neg)
            else:
                raise ModelBuildError("F1 leaves are labelled jointly, not one at a time")
            result = (1, cost1) if cost1 < cost0 else (0, cost0)
        self._cache[counts] = result
        return result

    def f1_labelling(self, leaves: Sequence[Tuple[int, int, int]]) -> Tuple[Dict[int, int], Fraction]:
        """
        F1-optimal labels for leaves given as (leaf_id, negatives, positives)

        The optimal positive set is a prefix of the leaves sorted by precision;
        every prefix is scored and the shortest best one is kept.
        """
        populated = [leaf for leaf in leaves if leaf[1] + leaf[2] > 0]
        ordered = sorted(populated, key=lambda l: (-Fraction(l[2], l[1] + l[2]), l[0]))
        best_k, best_f1 = 0, self._f1(0, 0)
        tp = fp = 0
        for k, (_, neg, pos) in enumerate(ordered, start=1):
            tp += pos
            fp += neg
            value = self._f1(tp, fp)
            if value > best_f1:
                best_k, best_f1 = k, value
        labels = {leaf[0]: 0 for leaf in leaves}
        for leaf_id, _, _ in ordered[:best_k]:
            labels[leaf_id] = 1
        return labels, best_f1

    def f1_upper_bound(self, leaves: Sequence[Tuple[int, int, int]], free_pos: int) -> Fraction:
        """Best F1 when free_pos positives in undetermined regions are classified perfectly"""
        extra = [(-1, 0, free_pos)] if free_pos else []
        _, value = self.f1_labelling(list(leaves) + extra)
        return value

    def _f1(self, tp: int, fp: int) -> Fraction:
        fn = self.n_pos - tp
        return Fraction(2 * (self.n_pos - fn), 2 * self.n_pos - fn + fp)

    def to_objective(self, loss: Fraction) -> Fraction:
        if self.obj.kind == Kind.BALANCED_ACCURACY:
            return 1 - loss
        if self.obj.kind == Kind.F1:
            return -loss
        return loss

    def to_loss(self, objective: Fraction) -> Fraction:
        # the mapping is an involution for every kind
        return self.to_objective(objective)


def tree_objective(tree: BooleanTree, data: BinaryDataset, hp: HyperParams, obj: ObjectiveKind) -> Fraction:
    """
    Objective value of a tree on a dataset computed from its predictions

    Args:
        tree: Tree to score
        data: Dataset (normally the training set)
        hp: Hyperparameters (alpha)
        obj: Objective kind

    Returns:
        Exact objective value in the model's own sense
    """
    y_pred = predict_all(tree, data.x) if data.n else np.zeros(0, dtype=np.int64)
    cm = confusion(data.y, y_pred, n_classes=data.n_classes)
    complexity = hp.alpha_exact * tree.n_selected_features
    kind = obj.kind
    if kind == Kind.ACCURACY:
        return (1 - accuracy(cm)) + complexity
    if kind == Kind.COST_SENSITIVE:
        return mec(cm, obj.cost_fp, obj.cost_fn) / data.n + complexity
    if kind == Kind.BALANCED_ACCURACY:
        return balanced_accuracy(cm, data.n_pos, data.n_neg) - complexity
    return f1(cm, data.n_pos) - complexity


def leaf_counts(tree: BooleanTree, data: BinaryDataset) -> Dict[int, List[int]]:
    """Per-leaf class counts (M_kt) over the live leaves of a tree"""
    leaves = route_all(tree, data.x) if data.n else np.zeros(0, dtype=np.int64)
    counts = {leaf: [0] * data.n_classes for leaf in tree.live_leaves()}
    for leaf, label in zip(leaves.tolist(), data.y.tolist()):
        counts.setdefault(leaf, [0] * data.n_classes)[label] += 1
    return counts


def optimal_gap(objective: Fraction, bound: Optional[Fraction]) -> Fraction:
    """|objective - bound| / max(1, |objective|)"""
    if bound is None:
        return Fraction(0)
    return abs(objective - bound) / max(Fraction(1), abs(objective))
