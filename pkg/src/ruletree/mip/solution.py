"""
Assignments of model variables: solution files, substitution checks, and
the mapping between assignments and trees

Solution file format: one "variable_name value" pair per line, '#' starts a
comment. Variables not listed are 0.
"""
import os
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Mapping, Optional

import numpy as np
from loguru import logger

from src.ruletree.data.dataset import BinaryDataset
from src.ruletree.exceptions import SolutionError
from src.ruletree.mip.builder import VAR_F1, var_a, var_b, var_c, var_d, var_e, var_l, var_m, var_n, var_z
from src.ruletree.mip.lp_io import format_number, parse_number
from src.ruletree.mip.model_spec import ModelSpec, satisfied
from src.ruletree.tree.topology import TreeTopology
from src.ruletree.tree.tree import BooleanTree, SplitRule, canonicalize, route_all

TOLERANCE = Fraction(1, 10 ** 6)


@dataclass(frozen=True)
class Assignment:
    """Variable name -> exact value"""

    values: Dict[str, Fraction] = field(default_factory=dict)

    def __getitem__(self, name: str) -> Fraction:
        return self.values[name]

    def get(self, name: str, default: Fraction = Fraction(0)) -> Fraction:
        return self.values.get(name, default)


@dataclass
class CheckReport:
    feasible: bool
    violations: List[str]
    objective: Optional[Fraction]


def zero_assignment(model: ModelSpec) -> Assignment:
    return Assignment({name: Fraction(0) for name in model.variables})


def parse_solution(model: ModelSpec, path: str) -> Assignment:
    """
    Read a "name value" solution file against a model

    Args:
        model: Model the solution belongs to
        path: Solution file

    Returns:
        Assignment covering every model variable
    """
    if not os.path.exists(path):
        raise SolutionError(f"Solution file not found: {path}")
    values = {name: Fraction(0) for name in model.variables}
    with open(path, encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) != 2:
                raise SolutionError(f"Line {lineno}: expected 'name value', got {raw.strip()!r}")
            name, token = fields
            if name not in model.variables:
                raise SolutionError(f"Line {lineno}: unknown variable {name}")
            try:
                values[name] = parse_number(token)
            except (ValueError, ZeroDivisionError) as e:
                raise SolutionError(f"Line {lineno}: unparseable value {token!r} for {name}") from e
    logger.debug(f"Parsed solution with {sum(1 for v in values.values() if v)} nonzero values from {path}")
    return Assignment(values)


def write_solution(model: ModelSpec, assignment: Assignment, path: str) -> None:
    """Write the nonzero values of an assignment in solution-file format"""
    lines = ["# ruletree solution"]
    lines.append(f"# objective {format_number(model.objective.value(assignment.values))}")
    for name in model.variables:
        value = assignment.get(name)
        if value != 0:
            lines.append(f"{name} {format_number(value)}")
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\n".join(lines) + "\n")
    logger.info(f"Solution written to {path}")


def check_assignment(model: ModelSpec, assignment: Assignment, tol: Fraction = TOLERANCE) -> CheckReport:
    """
    Substitute an assignment into every bound and constraint

    Args:
        model: Model to check against
        assignment: Values for every model variable
        tol: Absolute tolerance for constraints, bounds and integrality

    Returns:
        CheckReport with the violated names and the exact objective value
    """
    missing = [name for name in model.variables if name not in assignment.values]
    if missing:
        raise SolutionError(f"Assignment lacks {len(missing)} variable(s), e.g. {missing[0]}", missing)
    values = assignment.values
    violations: List[str] = []
    for var in model.variables.values():
        value = values[var.name]
        if value < var.lb - tol or (var.ub is not None and value > var.ub + tol):
            violations.append(f"bound:{var.name}")
        if var.integral and abs(value - round(value)) > tol:
            violations.append(f"non-integral {var.vtype.value}:{var.name}")
    for constraint in model.all_constraints():
        if not satisfied(constraint.activity(values), constraint.sense, constraint.rhs, tol):
            violations.append(constraint.name)
    objective = model.objective.value(values)
    return CheckReport(feasible=not violations, violations=violations, objective=objective)


def _meta_int(model: ModelSpec, key: str, fallback: int) -> int:
    value = model.meta.get(key)
    return int(value) if value is not None else fallback


def _shape(model: ModelSpec):
    """(depth, n_features, n_classes) from meta or variable names"""
    branch = {int(m.group(1)) for m in (re.fullmatch(r"d_(\d+)", n) for n in model.variables) if m}
    if not branch:
        raise SolutionError("Model has no branch-node variables")
    depth = _meta_int(model, "depth", (max(branch) + 1).bit_length() - 1)
    features = {int(m.group(1)) for m in (re.fullmatch(r"a_1_f(\d+)", n) for n in model.variables) if m}
    n_features = _meta_int(model, "features", max(features, default=0))
    classes = {int(m.group(1)) for m in (re.fullmatch(r"c_\d+_(\d+)", n) for n in model.variables) if m}
    n_classes = _meta_int(model, "classes", max(classes, default=1) + 1)
    return depth, n_features, n_classes


def extract_tree(model: ModelSpec, assignment: Assignment) -> BooleanTree:
    """
    Decode a feasible assignment into a canonical tree

    An active node whose rule can never send a row right (no features, or
    b_t >= |S_t|) is a dead split: its whole region flows to the left child.
    Such nodes are removed by lifting the left child's subtree into their
    place, which keeps every row's prediction.

    Args:
        model: Model the assignment solves
        assignment: Feasible assignment

    Returns:
        Canonical BooleanTree
    """
    report = check_assignment(model, assignment)
    if not report.feasible:
        shown = ", ".join(report.violations[:5])
        raise SolutionError(f"Assignment is infeasible ({len(report.violations)} violations: {shown})", report.violations)

    depth, n_features, n_classes = _shape(model)
    topology = TreeTopology(depth)
    decoded: Dict[int, SplitRule] = {}
    dead: List[int] = []
    for t in topology.branch_nodes:
        if assignment.get(var_d(t)) <= Fraction(1, 2):
            decoded[t] = SplitRule.inactive()
            continue
        features = [f for f in range(n_features) if assignment.get(var_a(t, f)) > Fraction(1, 2)]
        threshold = round(assignment.get(var_b(t)))
        if not features or threshold >= len(features):
            decoded[t] = SplitRule.inactive()
            dead.append(t)
        else:
            decoded[t] = SplitRule.split(features, threshold)

    source_labels: Dict[int, Optional[int]] = {}
    for t in topology.leaves:
        chosen = [k for k in range(n_classes) if assignment.get(var_c(t, k)) > Fraction(1, 2)]
        if len(chosen) > 1:
            raise SolutionError(f"Leaf {t} carries several labels {chosen}")
        if assignment.get(var_l(t)) > Fraction(1, 2) and not chosen:
            raise SolutionError(f"Live leaf {t} has no label")
        source_labels[t] = chosen[0] if chosen else None

    if dead:
        logger.warning(f"Dead split(s) at node(s) {dead} decoded as pass-through to the left child")

    rules = {t: SplitRule.inactive() for t in topology.branch_nodes}
    labels: Dict[int, Optional[int]] = {t: None for t in topology.leaves}

    def place(src: int, dst: int) -> None:
        # copy the routing below src into the subtree rooted at dst (dst is never deeper than src)
        if not topology.is_leaf(src) and src in dead:
            place(2 * src, dst)
        elif topology.is_leaf(src) or not decoded[src].active:
            labels[topology.subtree_leftmost_leaf(dst)] = source_labels[topology.subtree_leftmost_leaf(src)]
        else:
            rules[dst] = decoded[src]
            place(2 * src, 2 * dst)
            place(2 * src + 1, 2 * dst + 1)

    place(1, 1)
    tree = canonicalize(BooleanTree(
        topology,
        tuple(rules[t] for t in topology.branch_nodes),
        tuple(labels[t] for t in topology.leaves),
        n_features,
    ))
    tree.validate()
    return tree


def encode_tree(model: ModelSpec, tree: BooleanTree, train: BinaryDataset) -> Assignment:
    """
    Full assignment (a, b, d, c, l, z, M, N, e, F1) describing a tree on the training set

    Args:
        model: Model built on train
        tree: Tree with labels on its live leaves
        train: Training data used to build the model

    Returns:
        Assignment covering every model variable
    """
    depth, n_features, n_classes = _shape(model)
    if tree.depth != depth or tree.n_features != n_features or train.n_features != n_features:
        raise SolutionError(
            f"Tree (depth {tree.depth}, {tree.n_features} features) does not match the model "
            f"(depth {depth}, {n_features} features)"
        )
    values: Dict[str, Fraction] = {name: Fraction(0) for name in model.variables}

    def put(name: str, value) -> None:
        if name not in values:
            raise SolutionError(f"Model has no variable {name}")
        values[name] = Fraction(value)

    topology = tree.topology
    for t in topology.branch_nodes:
        rule = tree.rule(t)
        if not rule.active:
            continue
        put(var_d(t), 1)
        put(var_b(t), rule.threshold)
        for f in rule.features:
            put(var_a(t, f), 1)

    leaves = route_all(tree, train.x) if train.n else np.zeros(0, dtype=np.int64)
    per_class_errors = var_e(topology.leftmost_leaf, 0) in values
    fn = fp = 0
    for t in tree.live_leaves():
        label = tree.label(t)
        put(var_l(t), 1)
        put(var_c(t, label), 1)
        rows = np.flatnonzero(leaves == t)
        for i in rows:
            put(var_z(int(i), t), 1)
        counts = np.bincount(train.y[rows], minlength=n_classes)
        for k in range(n_classes):
            put(var_m(k, t), int(counts[k]))
        put(var_n(t), len(rows))
        errors = len(rows) - int(counts[label])
        if per_class_errors:
            put(var_e(t, label), errors)
            if label == 1:
                fp += errors
            else:
                fn += errors
        else:
            put(var_e(t), errors)

    if VAR_F1 in values:
        n_pos = train.n_pos
        put(VAR_F1, Fraction(2 * (n_pos - fn), 2 * n_pos - fn + fp))
    return Assignment(values)
