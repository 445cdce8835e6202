"""
Boolean-rule trees: split rules, routing, prediction and canonical form

A branch node t with rule (S_t, b_t) sends instance x LEFT iff
sum_{f in S_t} x_f <= b_t and RIGHT otherwise. Inactive branch nodes send
every instance LEFT.
"""
from dataclasses import dataclass, field, replace
from typing import Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np

from src.ruletree.exceptions import TreeFormatError
from src.ruletree.tree.topology import TreeTopology


@dataclass(frozen=True)
class SplitRule:
    """Rule "sum of x_f over features <= threshold?" at one branch node"""

    features: Tuple[int, ...] = ()
    threshold: int = 0
    active: bool = False

    def __post_init__(self):
        features = tuple(int(f) for f in self.features)
        object.__setattr__(self, "features", features)
        if len(set(features)) != len(features):
            raise TreeFormatError(f"Duplicate features in rule {features}")
        if any(f < 0 for f in features):
            raise TreeFormatError(f"Negative feature index in rule {features}")
        if not self.active:
            if features or self.threshold != 0:
                raise TreeFormatError("An inactive rule must have no features and threshold 0")
            return
        if not 0 <= self.threshold <= max(len(features) - 1, 0):
            raise TreeFormatError(
                f"Threshold {self.threshold} outside 0..{max(len(features) - 1, 0)} for {len(features)} feature(s)"
            )

    @classmethod
    def inactive(cls) -> "SplitRule":
        return cls()

    @classmethod
    def split(cls, features: Iterable[int], threshold: int) -> "SplitRule":
        return cls(features=tuple(features), threshold=threshold, active=True)

    @property
    def n_features(self) -> int:
        return len(self.features)

    def goes_right(self, x: Sequence[int]) -> bool:
        return self.active and sum(int(x[f]) for f in self.features) >= self.threshold + 1

    def canonical(self) -> "SplitRule":
        return replace(self, features=tuple(sorted(self.features)))


@dataclass(frozen=True)
class BooleanTree:
    """
    Depth-D maximal tree with one rule per branch node and optional leaf labels

    rules[t-1] is the rule of branch node t; leaf_labels[j] labels leaf
    2^D + j (None for unlabeled leaves).
    """

    topology: TreeTopology
    rules: Tuple[SplitRule, ...]
    leaf_labels: Tuple[Optional[int], ...]
    n_features: int
    feature_names: Tuple[str, ...] = field(default=(), compare=False)
    class_names: Tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))
        object.__setattr__(self, "leaf_labels", tuple(self.leaf_labels))
        if len(self.rules) != len(self.topology.branch_nodes):
            raise TreeFormatError(f"Expected {len(self.topology.branch_nodes)} rules, got {len(self.rules)}")
        if len(self.leaf_labels) != len(self.topology.leaves):
            raise TreeFormatError(f"Expected {len(self.topology.leaves)} leaf labels, got {len(self.leaf_labels)}")
        for t, rule in zip(self.topology.branch_nodes, self.rules):
            if any(f >= self.n_features for f in rule.features):
                raise TreeFormatError(f"Node {t} uses a feature index >= {self.n_features}")
        for label in self.leaf_labels:
            if label is not None and label < 0:
                raise TreeFormatError(f"Negative leaf label {label}")

    @property
    def depth(self) -> int:
        return self.topology.depth

    def rule(self, t: int) -> SplitRule:
        return self.rules[t - 1]

    def label(self, leaf: int) -> Optional[int]:
        return self.leaf_labels[leaf - self.topology.leftmost_leaf]

    def live_nodes(self) -> Set[int]:
        """Nodes reached structurally: both children of active nodes, the left child of inactive ones"""
        live = {1}
        for t in self.topology.branch_nodes:
            if t not in live:
                continue
            live.add(2 * t)
            if self.rule(t).active:
                live.add(2 * t + 1)
        return live

    def live_leaves(self) -> List[int]:
        live = self.live_nodes()
        return [t for t in self.topology.leaves if t in live]

    def active_nodes(self) -> List[int]:
        return [t for t in self.topology.branch_nodes if self.rule(t).active]

    @property
    def n_selected_features(self) -> int:
        """Total number of (node, feature) selections, i.e. sum of a_tf"""
        return sum(r.n_features for r in self.rules if r.active)

    def sort_key(self) -> Tuple:
        """Tie-break order: fewer selected features, then smallest (node, S_t, b_t) encoding"""
        encoding = tuple((t, self.rule(t).features, self.rule(t).threshold) for t in self.active_nodes())
        return (self.n_selected_features, encoding)

    def validate(self) -> None:
        """Check the canonical-tree invariants (nesting and leaf labelling)"""
        for t in self.topology.branch_nodes:
            if t > 1 and self.rule(t).active and not self.rule(t // 2).active:
                raise TreeFormatError(f"Node {t} is active below inactive node {t // 2}")
        live = self.live_nodes()
        for leaf, label in zip(self.topology.leaves, self.leaf_labels):
            if leaf in live and label is None:
                raise TreeFormatError(f"Reachable leaf {leaf} has no label")
            if leaf not in live and label is not None:
                raise TreeFormatError(f"Unreachable leaf {leaf} carries label {label}")


def _check_dimension(tree: BooleanTree, width: int) -> None:
    if width != tree.n_features:
        raise TreeFormatError(f"Instance has {width} features, tree expects {tree.n_features}")


def route(tree: BooleanTree, x: Sequence[int]) -> int:
    """
    Leaf reached by one instance

    Args:
        tree: Tree to route through
        x: Binary feature vector of the tree's dimensionality

    Returns:
        Depth-D leaf id
    """
    _check_dimension(tree, len(x))
    t = 1
    while not tree.topology.is_leaf(t):
        t = 2 * t + 1 if tree.rule(t).goes_right(x) else 2 * t
    return t


def route_all(tree: BooleanTree, X: np.ndarray) -> np.ndarray:
    """Vectorised route over the rows of X"""
    X = np.asarray(X)
    if X.ndim != 2:
        raise TreeFormatError(f"Expected a 2-d matrix, got shape {X.shape}")
    _check_dimension(tree, X.shape[1])
    nodes = np.ones(X.shape[0], dtype=np.int64)
    for _ in range(tree.depth):
        step = 2 * nodes
        for t in np.unique(nodes):
            rule = tree.rule(int(t))
            if not rule.active or not rule.features:
                continue
            rows = nodes == t
            sums = X[np.ix_(rows, list(rule.features))].sum(axis=1)
            step[rows] += (sums >= rule.threshold + 1).astype(np.int64)
        nodes = step
    return nodes


def predict(tree: BooleanTree, x: Sequence[int]) -> int:
    """Class label of the leaf reached by x"""
    leaf = route(tree, x)
    label = tree.label(leaf)
    if label is None:
        raise TreeFormatError(f"Instance reached unlabeled leaf {leaf}")
    return label


def predict_all(tree: BooleanTree, X: np.ndarray) -> np.ndarray:
    leaves = route_all(tree, X)
    labels = np.empty(len(leaves), dtype=np.int64)
    for leaf in np.unique(leaves):
        label = tree.label(int(leaf))
        if label is None:
            raise TreeFormatError(f"Instance reached unlabeled leaf {int(leaf)}")
        labels[leaves == leaf] = label
    return labels


def equivalent_univariate_depth(tree: BooleanTree) -> int:
    """
    Depth of a univariate tree expressing the same rules

    Each depth level contributes 2^(N-1), N being the largest feature count
    among active nodes on that level; levels without active nodes add 0.
    """
    live = tree.live_nodes()
    total = 0
    any_active = False
    for d in range(1, tree.depth + 1):
        sizes = [
            tree.rule(t).n_features
            for t in tree.topology.branch_nodes_at_depth(d)
            if t in live and tree.rule(t).active and tree.rule(t).n_features > 0
        ]
        if sizes:
            any_active = True
            total += 2 ** (max(sizes) - 1)
    if not any_active:
        raise TreeFormatError("Tree has no active split")
    return total


def canonicalize(tree: BooleanTree) -> BooleanTree:
    """
    Canonical form: sorted feature sets, cleared subtrees under inactive
    nodes, and no labels on unreachable leaves
    """
    rules: List[SplitRule] = list(r.canonical() for r in tree.rules)
    for t in tree.topology.branch_nodes:
        if t > 1 and not rules[t // 2 - 1].active:
            rules[t - 1] = SplitRule.inactive()
    skeleton = replace(tree, rules=tuple(rules))
    live = skeleton.live_nodes()
    labels = tuple(
        label if leaf in live else None
        for leaf, label in zip(tree.topology.leaves, tree.leaf_labels)
    )
    return replace(skeleton, leaf_labels=labels)


def single_leaf_tree(depth: int, label: int, n_features: int, **names) -> BooleanTree:
    """All-inactive tree predicting one constant label"""
    topology = TreeTopology(depth)
    labels: List[Optional[int]] = [None] * len(topology.leaves)
    labels[0] = label
    return BooleanTree(
        topology=topology,
        rules=tuple(SplitRule.inactive() for _ in topology.branch_nodes),
        leaf_labels=tuple(labels),
        n_features=n_features,
        **names,
    )


def render_tree(tree: BooleanTree, feature_names: Optional[Sequence[str]] = None) -> str:
    """Indented if/else listing of the tree's rules"""
    names = list(feature_names or tree.feature_names or [f"f{j + 1}" for j in range(tree.n_features)])
    classes = tree.class_names

    def label_text(leaf: int) -> str:
        label = tree.label(leaf)
        if label is None:
            return "predict ?"
        return f"predict {classes[label] if label < len(classes) else label}"

    lines: List[str] = []

    def walk(t: int, indent: int) -> None:
        pad = "    " * indent
        if tree.topology.is_leaf(t):
            lines.append(pad + label_text(t))
            return
        rule = tree.rule(t)
        if not rule.active:
            walk(2 * t, indent)
            return
        condition = " + ".join(names[f] for f in rule.features) or "0"
        lines.append(f"{pad}if {condition} <= {rule.threshold}:")
        walk(2 * t, indent + 1)
        lines.append(f"{pad}else:")
        walk(2 * t + 1, indent + 1)

    walk(1, 0)
    return "\n".join(lines)
