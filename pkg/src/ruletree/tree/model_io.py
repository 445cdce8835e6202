"""
Line-oriented text format for trained trees

    # ruletree model v1
    depth 1
    features 5
    names<TAB>f1<TAB>f2<TAB>...
    classes<TAB>0<TAB>1
    node 1 split 0,1,2 le 1
    leaf 2 label 0
    leaf 3 label 1

Feature indices are 0-based. Inactive nodes are written as "node t inactive",
unlabeled leaves as "leaf t none". Identical canonical trees give identical bytes.
"""
import os
from typing import Dict, List, Optional

from loguru import logger

from src.ruletree.exceptions import TreeFormatError
from src.ruletree.tree.topology import TreeTopology
from src.ruletree.tree.tree import BooleanTree, SplitRule, canonicalize

MODEL_HEADER = "# ruletree model v1"


def dumps_tree(tree: BooleanTree) -> str:
    tree = canonicalize(tree)
    lines = [MODEL_HEADER, f"depth {tree.depth}", f"features {tree.n_features}"]
    if tree.feature_names:
        lines.append("\t".join(["names", *tree.feature_names]))
    if tree.class_names:
        lines.append("\t".join(["classes", *tree.class_names]))
    for t in tree.topology.branch_nodes:
        rule = tree.rule(t)
        if rule.active:
            features = ",".join(str(f) for f in rule.features)
            lines.append(f"node {t} split {features} le {rule.threshold}")
        else:
            lines.append(f"node {t} inactive")
    for leaf in tree.topology.leaves:
        label = tree.label(leaf)
        lines.append(f"leaf {leaf} {'none' if label is None else f'label {label}'}")
    return "\n".join(lines) + "\n"


def save_tree(tree: BooleanTree, path: str) -> None:
    """Write the canonical form of tree to path"""
    text = dumps_tree(tree)
    tmp_path = f"{path}.tmp"
    with open(tmp_path, "w", encoding="utf-8") as handle:
        handle.write(text)
    os.replace(tmp_path, path)
    logger.info(f"Model written to {path}")


def _parse_rule(t: int, fields: List[str]) -> SplitRule:
    if fields == ["inactive"]:
        return SplitRule.inactive()
    if len(fields) == 4 and fields[0] == "split" and fields[2] == "le":
        try:
            features = [int(f) for f in fields[1].split(",") if f]
            threshold = int(fields[3])
        except ValueError as e:
            raise TreeFormatError(f"Node {t}: malformed rule {' '.join(fields)!r}") from e
        try:
            return SplitRule.split(features, threshold)
        except TreeFormatError as e:
            raise TreeFormatError(f"Node {t}: {e}") from e
    raise TreeFormatError(f"Node {t}: malformed rule {' '.join(fields)!r}")


def loads_tree(text: str) -> BooleanTree:
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise TreeFormatError("Model file is empty")
    if lines[0].strip() != MODEL_HEADER:
        raise TreeFormatError(f"Unsupported model header {lines[0]!r}")

    depth: Optional[int] = None
    n_features: Optional[int] = None
    feature_names: tuple = ()
    class_names: tuple = ()
    rules: Dict[int, SplitRule] = {}
    labels: Dict[int, Optional[int]] = {}
    for line in lines[1:]:
        if line.startswith("names\t") or line == "names":
            feature_names = tuple(line.split("\t")[1:])
            continue
        if line.startswith("classes\t") or line == "classes":
            class_names = tuple(line.split("\t")[1:])
            continue
        fields = line.split()
        try:
            if fields[0] == "depth":
                depth = int(fields[1])
            elif fields[0] == "features":
                n_features = int(fields[1])
            elif fields[0] == "node":
                t = int(fields[1])
                if t in rules:
                    raise TreeFormatError(f"Node {t} defined twice")
                rules[t] = _parse_rule(t, fields[2:])
            elif fields[0] == "leaf":
                t = int(fields[1])
                if t in labels:
                    raise TreeFormatError(f"Leaf {t} defined twice")
                if fields[2:] == ["none"]:
                    labels[t] = None
                elif len(fields) == 4 and fields[2] == "label":
                    labels[t] = int(fields[3])
                else:
                    raise TreeFormatError(f"Malformed leaf line {line!r}")
            else:
                raise TreeFormatError(f"Unknown model line {line!r}")
        except (IndexError, ValueError) as e:
            raise TreeFormatError(f"Malformed model line {line!r}") from e

    if depth is None or n_features is None:
        raise TreeFormatError("Model file lacks 'depth' or 'features'")
    topology = TreeTopology(depth)
    if sorted(rules) != list(topology.branch_nodes):
        raise TreeFormatError(f"Model must define nodes 1..{len(topology.branch_nodes)}")
    if sorted(labels) != list(topology.leaves):
        raise TreeFormatError(f"Model must define leaves {topology.leaves.start}..{topology.leaves.stop - 1}")
    tree = BooleanTree(
        topology=topology,
        rules=tuple(rules[t] for t in topology.branch_nodes),
        leaf_labels=tuple(labels[t] for t in topology.leaves),
        n_features=n_features,
        feature_names=feature_names,
        class_names=class_names,
    )
    tree.validate()
    return tree


def load_tree(path: str) -> BooleanTree:
    """Read and validate a model file"""
    if not os.path.exists(path):
        raise TreeFormatError(f"Model file not found: {path}")
    with open(path, encoding="utf-8") as handle:
        text = handle.read()
    tree = loads_tree(text)
    logger.info(f"Loaded depth-{tree.depth} model from {path}")
    return tree
