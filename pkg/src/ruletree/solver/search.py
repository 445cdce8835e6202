"""
Depth-first branch-and-bound over Boolean-rule split assignments

Branch nodes are decided in breadth-first order (1, 2, 3, ...). At a live
node the options are "inactive" plus every candidate (S, b); splits that
induce the same partition of the node's region are tried once. Leaves are
scored as soon as their region is fixed, so the bound of a node is the exact
loss of its determined leaves plus alpha times the committed features.
"""
import math
import multiprocessing
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import pandas as pd
from loguru import logger

from config.config import get_settings
from src.ruletree.data.dataset import BinaryDataset
from src.ruletree.exceptions import InfeasibleError, ModelBuildError, UsageError
from src.ruletree.mip.objective import ObjectiveKind
from src.ruletree.solver.bitset import Candidate, class_masks, enumerate_candidates, feature_masks, full_mask
from src.ruletree.solver.objectives import ScoringContext
from src.ruletree.solver.result import SearchStats, SolveResult, Status
from src.ruletree.tree.params import HyperParams
from src.ruletree.tree.topology import TreeTopology
from src.ruletree.tree.tree import BooleanTree, SplitRule

Region = Tuple[int, int]  # (node id, row mask)


@dataclass(frozen=True)
class SearchNode:
    """
    Partial assignment of split rules

    rules holds the decided rules of nodes 1..len(rules). regions are the
    undecided live branch nodes with the rows reaching them; leaves are the
    leaves whose rows are already fixed. leaf_loss is the exact loss of those
    leaves for separable objectives (0 for F1).
    """

    rules: Tuple[SplitRule, ...]
    regions: Tuple[Region, ...]
    leaves: Tuple[Region, ...]
    n_features: int
    leaf_loss: Fraction
    bound: Fraction

    @property
    def position(self) -> int:
        return len(self.rules)

    def encoding(self) -> Tuple:
        return tuple(
            (t, rule.features, rule.threshold)
            for t, rule in enumerate(self.rules, start=1)
            if rule.active
        )

    def key(self) -> Tuple:
        """Tie-break key, equal to BooleanTree.sort_key of the completed tree"""
        return (self.n_features, self.encoding())


@dataclass
class SearchProblem:
    """Immutable inputs shared by every worker of one search"""

    topology: TreeTopology
    n: int
    n_features: int
    s_min: int
    candidates: List[Candidate]
    class_masks: List[int]
    ctx: ScoringContext
    feature_names: Tuple[str, ...] = ()
    class_names: Tuple[str, ...] = ()

    @classmethod
    def build(cls, train: BinaryDataset, hp: HyperParams, obj: ObjectiveKind) -> "SearchProblem":
        if hp.f_max > train.n_features:
            raise ModelBuildError(f"F_max={hp.f_max} exceeds the number of features ({train.n_features})")
        ctx = ScoringContext.build(train, hp, obj)
        masks = feature_masks(train)
        return cls(
            topology=TreeTopology(hp.depth),
            n=train.n,
            n_features=train.n_features,
            s_min=hp.s_min,
            candidates=enumerate_candidates(masks, train.n, hp.f_max, hp.fixed_threshold),
            class_masks=class_masks(train),
            ctx=ctx,
            feature_names=train.feature_names,
            class_names=train.class_names,
        )

    @property
    def n_branch(self) -> int:
        return len(self.topology.branch_nodes)

    def counts(self, mask: int) -> Tuple[int, ...]:
        return tuple((mask & m).bit_count() for m in self.class_masks)

    def leaf_triples(self, leaves: Sequence[Region]) -> List[Tuple[int, int, int]]:
        triples = []
        for leaf, mask in leaves:
            counts = self.counts(mask)
            triples.append((leaf, counts[0], counts[1]))
        return triples

    def root(self) -> SearchNode:
        node = SearchNode((), ((1, full_mask(self.n)),), (), 0, Fraction(0), Fraction(0))
        return self._finish(node)

    def is_complete(self, node: SearchNode) -> bool:
        return node.position == self.n_branch

    def lower_bound(self, node: SearchNode) -> Fraction:
        """
        Admissible bound on the loss of every completion of node

        Determined leaves are scored exactly; undetermined regions contribute
        nothing (separable objectives) or are assumed perfectly classified (F1).
        """
        complexity = self.ctx.alpha * node.n_features
        if self.ctx.separable:
            return node.leaf_loss + complexity
        free_pos = sum((mask & self.class_masks[1]).bit_count() for _, mask in node.regions)
        return -self.ctx.f1_upper_bound(self.leaf_triples(node.leaves), free_pos) + complexity

    def _finish(self, node: SearchNode) -> SearchNode:
        """Skip dead nodes (under an inactive ancestor) and attach the bound"""
        rules = list(node.rules)
        live = {t for t, _ in node.regions}
        while len(rules) < self.n_branch and (len(rules) + 1) not in live:
            rules.append(SplitRule.inactive())
        node = replace(node, rules=tuple(rules))
        return replace(node, bound=self.lower_bound(node))

    def _leaf_loss(self, mask: int) -> Fraction:
        if not self.ctx.separable:
            return Fraction(0)
        return self.ctx.leaf(self.counts(mask))[1]

    def children(self, node: SearchNode) -> List[SearchNode]:
        """Options at the next live node, ordered by (bound, canonical candidate order)"""
        t = node.position + 1
        region = dict(node.regions)[t]
        others = tuple(r for r in node.regions if r[0] != t)

        sink = self.topology.subtree_leftmost_leaf(t)
        options: List[Tuple[int, SearchNode]] = [
            (-1, self._finish(SearchNode(
                node.rules + (SplitRule.inactive(),),
                others,
                node.leaves + ((sink, region),),
                node.n_features,
                node.leaf_loss + self._leaf_loss(region),
                Fraction(0),
            )))
        ]

        seen = set()
        for index, cand in enumerate(self.candidates):
            right = region & cand.right
            if right in seen:
                continue
            seen.add(right)
            left = region ^ right
            if left.bit_count() < self.s_min or right.bit_count() < self.s_min:
                continue
            regions, leaves, loss = list(others), list(node.leaves), node.leaf_loss
            for child, mask in ((2 * t, left), (2 * t + 1, right)):
                if self.topology.is_leaf(child):
                    leaves.append((child, mask))
                    loss += self._leaf_loss(mask)
                else:
                    regions.append((child, mask))
            child_node = self._finish(SearchNode(
                node.rules + (SplitRule.split(cand.features, cand.threshold),),
                tuple(sorted(regions)),
                tuple(leaves),
                node.n_features + len(cand.features),
                loss,
                Fraction(0),
            ))
            options.append((index, child_node))

        options.sort(key=lambda item: (item[1].bound, item[0]))
        return [item[1] for item in options]

    def build_tree(self, rules: Sequence[SplitRule], leaves: Sequence[Region]) -> BooleanTree:
        """Label the determined leaves optimally and assemble the tree"""
        labels: Dict[int, Optional[int]] = {leaf: None for leaf in self.topology.leaves}
        if self.ctx.separable:
            for leaf, mask in leaves:
                labels[leaf] = self.ctx.leaf(self.counts(mask))[0]
        else:
            assigned, _ = self.ctx.f1_labelling(self.leaf_triples(leaves))
            labels.update(assigned)
        tree = BooleanTree(
            topology=self.topology,
            rules=tuple(rules),
            leaf_labels=tuple(labels[leaf] for leaf in self.topology.leaves),
            n_features=self.n_features,
            feature_names=self.feature_names,
            class_names=self.class_names,
        )
        tree.validate()
        return tree

    def single_leaf(self) -> SearchNode:
        """Completion of the root with every node inactive"""
        everything = full_mask(self.n)
        return self._finish(SearchNode(
            (SplitRule.inactive(),),
            (),
            ((self.topology.leftmost_leaf, everything),),
            0,
            self._leaf_loss(everything),
            Fraction(0),
        ))


def _round_up(value: Fraction) -> float:
    return math.nextafter(float(value), math.inf)


class _Incumbent:
    """Best complete node seen by one process, optionally mirrored to a shared float"""

    def __init__(self, node: SearchNode, shared=None):
        self.node = node
        self.loss = node.bound
        self.key = node.key()
        self.updates = 0
        self.shared = shared

    def prunes(self, bound: Fraction) -> bool:
        if bound > self.loss:
            return True
        return self.shared is not None and bound > self.shared.value

    def offer(self, node: SearchNode) -> bool:
        candidate = (node.bound, node.key())
        if candidate >= (self.loss, self.key):
            return False
        self.node, self.loss, self.key = node, node.bound, candidate[1]
        self.updates += 1
        if self.shared is not None:
            ceiling = _round_up(node.bound)
            with self.shared.get_lock():
                if ceiling < self.shared.value:
                    self.shared.value = ceiling
        return True


class _Timeout(Exception):
    def __init__(self, dual: Fraction):
        super().__init__("time limit reached")
        self.dual = dual


@dataclass
class _Explorer:
    """Iterative depth-first search from one start node"""

    problem: SearchProblem
    incumbent: _Incumbent
    deadline: Optional[float]
    progress_every: int
    nodes: int = 0
    trace: Optional[List[Dict]] = None
    started: float = field(default_factory=time.monotonic)

    def _open_bound(self, stack: List[List], pending: Optional[SearchNode]) -> Fraction:
        best = self.incumbent.loss
        if pending is not None:
            best = min(best, pending.bound)
        for children, index in stack:
            if index < len(children):
                best = min(best, children[index].bound)
        return best

    def _record(self, stack: List[List], pending: Optional[SearchNode]) -> None:
        if self.trace is None:
            return
        ctx = self.problem.ctx
        incumbent = ctx.to_objective(self.incumbent.loss)
        dual = ctx.to_objective(self._open_bound(stack, pending))
        self.trace.append({
            "elapsed_s": round(time.monotonic() - self.started, 6),
            "nodes": self.nodes,
            "incumbent": float(incumbent),
            "dual_bound": float(dual),
            "gap": float(abs(incumbent - dual) / max(Fraction(1), abs(incumbent))),
        })

    def run(self, start: SearchNode) -> None:
        """Explore the subtree under start; raises _Timeout when the deadline passes"""
        stack: List[List] = [[[start], 0]]
        while stack:
            frame = stack[-1]
            children, index = frame
            if index >= len(children):
                stack.pop()
                continue
            node = children[index]
            frame[1] = index + 1
            if self.nodes % self.progress_every == 0:
                self._record(stack, node)
                if self.deadline is not None and time.monotonic() >= self.deadline:
                    raise _Timeout(self._open_bound(stack, node))
            self.nodes += 1
            if self.incumbent.prunes(node.bound):
                # siblings are sorted by bound
                frame[1] = len(children)
                continue
            if self.problem.is_complete(node):
                if self.incumbent.offer(node):
                    logger.debug(f"New incumbent loss={node.bound} after {self.nodes} nodes")
                    self._record(stack, None)
                continue
            stack.append([self.problem.children(node), 0])


# Per-process state of the worker pool
_WORKER_PROBLEM: Optional[SearchProblem] = None
_WORKER_SHARED = None


def _init_worker(problem: SearchProblem, shared) -> None:
    global _WORKER_PROBLEM, _WORKER_SHARED
    _WORKER_PROBLEM = problem
    _WORKER_SHARED = shared


def _run_task(args) -> Tuple[bool, SearchNode, Fraction, int, int]:
    """Search one root option; returns (completed, best node, open bound, nodes, updates)"""
    start, seed, deadline, progress_every = args
    problem = _WORKER_PROBLEM
    incumbent = _Incumbent(seed, _WORKER_SHARED)
    remaining = None if deadline is None else deadline - time.time()
    explorer = _Explorer(
        problem,
        incumbent,
        None if remaining is None else time.monotonic() + remaining,
        progress_every,
    )
    try:
        explorer.run(start)
    except _Timeout as e:
        return False, incumbent.node, e.dual, explorer.nodes, incumbent.updates
    return True, incumbent.node, incumbent.loss, explorer.nodes, incumbent.updates


class BranchAndBoundSolver:
    """Exact search with a wall-clock budget and an optional process pool"""

    def __init__(self, workers: int = 1, progress_every: int = 2048, trace_path: Optional[str] = None):
        if workers < 1:
            raise UsageError(f"workers must be >= 1, got {workers}")
        if progress_every < 1:
            raise UsageError(f"progress_every must be >= 1, got {progress_every}")
        self.workers = workers
        self.progress_every = progress_every
        self.trace_path = trace_path

    def solve(
        self,
        train: BinaryDataset,
        hp: HyperParams,
        obj: ObjectiveKind,
        budget: Optional[float] = None,
    ) -> SolveResult:
        """
        Find a loss-minimal tree on the training set

        Args:
            train: Binary training data
            hp: Hyperparameters
            obj: Objective kind
            budget: Wall-clock seconds, None for unlimited

        Returns:
            SolveResult; status Optimal when the search space was exhausted
        """
        if budget is not None and budget <= 0:
            raise UsageError(f"Time budget must be positive, got {budget}")
        if train.n < hp.s_min:
            raise InfeasibleError(f"S_min={hp.s_min} exceeds the {train.n} training rows")

        started = time.monotonic()
        problem = SearchProblem.build(train, hp, obj)
        logger.info(
            f"Searching depth={hp.depth} F_max={hp.f_max} objective={obj} "
            f"over {len(problem.candidates)} candidates, n={train.n}, workers={self.workers}"
        )
        incumbent = _Incumbent(problem.single_leaf())
        stats = SearchStats(candidates=len(problem.candidates), workers=self.workers)

        if self.workers == 1:
            completed, dual_loss = self._solve_serial(problem, incumbent, budget, stats, started)
        else:
            completed, dual_loss = self._solve_parallel(problem, incumbent, budget, stats)

        stats.elapsed_s = time.monotonic() - started
        stats.incumbent_updates += incumbent.updates
        tree = problem.build_tree(incumbent.node.rules, incumbent.node.leaves)
        objective = problem.ctx.to_objective(incumbent.loss)
        if completed:
            status, dual = Status.OPTIMAL, objective
        else:
            status, dual = Status.FEASIBLE_TIME_LIMIT, problem.ctx.to_objective(min(dual_loss, incumbent.loss))
            logger.warning(f"Time limit reached after {stats.nodes} nodes; returning incumbent")
        result = SolveResult(tree=tree, objective=objective, dual_bound=dual, status=status, stats=stats)
        logger.info(
            f"Search finished: status={status.value} objective={float(objective):.6f} "
            f"gap={float(result.gap):.4f} nodes={stats.nodes} ({stats.nodes_per_s:.0f}/s)"
        )
        return result

    def _solve_serial(self, problem, incumbent, budget, stats, started) -> Tuple[bool, Fraction]:
        explorer = _Explorer(
            problem,
            incumbent,
            None if budget is None else started + budget,
            self.progress_every,
            trace=[] if self.trace_path else None,
            started=started,
        )
        try:
            explorer.run(problem.root())
            completed, dual = True, incumbent.loss
        except _Timeout as e:
            completed, dual = False, e.dual
        stats.nodes = explorer.nodes
        if self.trace_path:
            explorer._record([], None)
            pd.DataFrame(explorer.trace).to_csv(self.trace_path, index=False)
            logger.info(f"Search trace written to {self.trace_path}")
        return completed, dual

    def _solve_parallel(self, problem, incumbent, budget, stats) -> Tuple[bool, Fraction]:
        root = problem.root()
        tasks = problem.children(root)
        stats.nodes = 1
        deadline = None if budget is None else time.time() + budget
        shared = multiprocessing.Value("d", _round_up(incumbent.loss))
        seed = incumbent.node
        completed, dual = True, incumbent.loss
        if self.trace_path:
            logger.warning("Search trace is only recorded with a single worker")

        with multiprocessing.Pool(self.workers, initializer=_init_worker, initargs=(problem, shared)) as pool:
            args = [(task, seed, deadline, self.progress_every) for task in tasks]
            for done, node, open_bound, nodes, updates in pool.imap_unordered(_run_task, args):
                stats.nodes += nodes
                stats.incumbent_updates += updates
                if (node.bound, node.key()) < (incumbent.loss, incumbent.key):
                    incumbent.node, incumbent.loss, incumbent.key = node, node.bound, node.key()
                if not done:
                    completed = False
                    dual = min(dual, open_bound)
        return completed, dual


def create_solver(workers: Optional[int] = None, trace_path: Optional[str] = None) -> BranchAndBoundSolver:
    """Create a solver configured from settings (RULETREE_WORKERS, RULETREE_PROGRESS_EVERY, ...)"""
    settings = get_settings()
    return BranchAndBoundSolver(
        workers=settings.workers if workers is None else workers,
        progress_every=settings.progress_every,
        trace_path=trace_path if trace_path is not None else settings.trace_path,
    )


def solve(
    train: BinaryDataset,
    hp: HyperParams,
    obj: ObjectiveKind,
    budget: Optional[float] = None,
    workers: int = 1,
) -> SolveResult:
    """Convenience wrapper around BranchAndBoundSolver.solve"""
    return create_solver(workers=workers).solve(train, hp, obj, budget)


def lower_bound(problem: SearchProblem, node: SearchNode) -> Fraction:
    """Admissible loss bound of a partial assignment (see SearchProblem.lower_bound)"""
    return problem.lower_bound(node)
