"""
Exhaustive enumeration of every nested split assignment, used as a test oracle
"""
import time
from fractions import Fraction
from typing import Iterator, List, Optional, Tuple

from loguru import logger

from config.config import get_settings
from src.ruletree.data.dataset import BinaryDataset
from src.ruletree.exceptions import InfeasibleError, SearchSpaceTooLarge
from src.ruletree.mip.objective import ObjectiveKind
from src.ruletree.solver.bitset import count_candidates, full_mask
from src.ruletree.solver.result import SearchStats, SolveResult, Status
from src.ruletree.solver.search import Region, SearchProblem
from src.ruletree.tree.params import HyperParams
from src.ruletree.tree.tree import SplitRule

# (active rules as (node, rule), leaves as (leaf, mask))
Partial = Tuple[Tuple[Tuple[int, SplitRule], ...], Tuple[Region, ...]]


def search_space_size(n_features: int, hp: HyperParams) -> int:
    """
    Number of nested assignments of a depth-D tree

    A subtree of height h has 1 + C * size(h-1)^2 assignments (inactive, or
    one of C candidates with independent children); size(0) = 1.
    """
    per_node = count_candidates(n_features, hp.f_max, hp.fixed_threshold)
    size = 1
    for _ in range(hp.depth):
        size = 1 + per_node * size * size
    return size


def _subtrees(problem: SearchProblem, t: int, region: int) -> Iterator[Partial]:
    topology = problem.topology
    if topology.is_leaf(t):
        yield (), ((t, region),)
        return
    yield (), ((topology.subtree_leftmost_leaf(t), region),)
    for cand in problem.candidates:
        right = region & cand.right
        left = region ^ right
        rule = SplitRule.split(cand.features, cand.threshold)
        rights = list(_subtrees(problem, 2 * t + 1, right))
        for left_rules, left_leaves in _subtrees(problem, 2 * t, left):
            for right_rules, right_leaves in rights:
                yield ((t, rule),) + left_rules + right_rules, left_leaves + right_leaves


def _loss(problem: SearchProblem, leaves: Tuple[Region, ...], n_features: int) -> Fraction:
    ctx = problem.ctx
    complexity = ctx.alpha * n_features
    if ctx.separable:
        return sum((ctx.leaf(problem.counts(mask))[1] for _, mask in leaves), Fraction(0)) + complexity
    _, value = ctx.f1_labelling(problem.leaf_triples(leaves))
    return -value + complexity


def brute_force(
    train: BinaryDataset,
    hp: HyperParams,
    obj: ObjectiveKind,
    limit: Optional[int] = None,
) -> SolveResult:
    """
    Evaluate every tree and return the best under (loss, sort key)

    Args:
        train: Binary training data
        hp: Hyperparameters
        obj: Objective kind
        limit: Largest enumerable space (defaults to settings.bruteforce_limit)

    Returns:
        SolveResult with status Optimal
    """
    limit = get_settings().bruteforce_limit if limit is None else limit
    size = search_space_size(train.n_features, hp)
    if size > limit:
        raise SearchSpaceTooLarge(f"Brute force would enumerate {size} trees (limit {limit})")
    if train.n < hp.s_min:
        raise InfeasibleError(f"S_min={hp.s_min} exceeds the {train.n} training rows")

    started = time.monotonic()
    problem = SearchProblem.build(train, hp, obj)
    logger.debug(f"Brute force over {size} assignments")

    best: Optional[Tuple[Fraction, Tuple, Partial]] = None
    visited = 0
    for active, leaves in _subtrees(problem, 1, full_mask(train.n)):
        visited += 1
        if any(mask.bit_count() < hp.s_min for _, mask in leaves):
            continue
        n_features = sum(rule.n_features for _, rule in active)
        key = (n_features, tuple((t, rule.features, rule.threshold) for t, rule in sorted(active, key=lambda a: a[0])))
        loss = _loss(problem, leaves, n_features)
        if best is None or (loss, key) < (best[0], best[1]):
            best = (loss, key, (active, leaves))

    if best is None:
        raise InfeasibleError("No tree satisfies S_min on the training data")
    loss, _, (active, leaves) = best
    rules: List[SplitRule] = [SplitRule.inactive() for _ in problem.topology.branch_nodes]
    for t, rule in active:
        rules[t - 1] = rule
    tree = problem.build_tree(rules, leaves)
    objective = problem.ctx.to_objective(loss)
    stats = SearchStats(
        nodes=visited,
        elapsed_s=time.monotonic() - started,
        incumbent_updates=0,
        candidates=len(problem.candidates),
    )
    return SolveResult(tree=tree, objective=objective, dual_bound=objective, status=Status.OPTIMAL, stats=stats)
