"""
Maximal-depth binary tree skeleton

Nodes are numbered 1..T with T = 2^(D+1) - 1; node t has children 2t
(left) and 2t+1 (right). Branch nodes are 1..floor(T/2), leaves the rest.
"""
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, FrozenSet, List, Tuple

from src.ruletree.exceptions import TreeFormatError


@dataclass(frozen=True)
class TreeTopology:
    """Index sets of the depth-D maximal tree"""

    depth: int

    def __post_init__(self):
        if self.depth < 1:
            raise TreeFormatError(f"Tree depth must be >= 1, got {self.depth}")

    @property
    def n_nodes(self) -> int:
        return 2 ** (self.depth + 1) - 1

    @property
    def branch_nodes(self) -> range:
        return range(1, self.n_nodes // 2 + 1)

    @property
    def leaves(self) -> range:
        return range(self.n_nodes // 2 + 1, self.n_nodes + 1)

    @property
    def leftmost_leaf(self) -> int:
        return 2 ** self.depth

    def is_leaf(self, t: int) -> bool:
        return self.n_nodes // 2 < t <= self.n_nodes

    def is_branch(self, t: int) -> bool:
        return 1 <= t <= self.n_nodes // 2

    @staticmethod
    def parent(t: int) -> int:
        return t // 2

    @staticmethod
    def node_depth(t: int) -> int:
        """Depth of node t with the root at depth 1"""
        return t.bit_length()

    def ancestors(self, t: int) -> FrozenSet[int]:
        """A(t)"""
        left, right = self.left_ancestors(t), self.right_ancestors(t)
        return left | right

    def left_ancestors(self, t: int) -> FrozenSet[int]:
        """A_L(t): ancestors whose left branch lies on the path to t"""
        return self._ancestor_sides[t][0]

    def right_ancestors(self, t: int) -> FrozenSet[int]:
        """A_R(t): ancestors whose right branch lies on the path to t"""
        return self._ancestor_sides[t][1]

    def potential_parents(self, t: int) -> FrozenSet[int]:
        """
        L_p(t) for a leaf t

        Ancestor s belongs to L_p(t) when the path from s's child down to t
        only takes left branches, so t receives s's child region whenever s
        splits and every node strictly between them is inactive.
        """
        if not self.is_leaf(t):
            raise TreeFormatError(f"Node {t} is not a leaf")
        result = {t // 2}
        node = t // 2
        child = t
        while node > 1 and child % 2 == 0:
            child, node = node, node // 2
            result.add(node)
        return frozenset(result)

    def subtree_leftmost_leaf(self, t: int) -> int:
        """Leaf reached from node t by always going left"""
        while not self.is_leaf(t):
            t = 2 * t
        return t

    def branch_nodes_at_depth(self, d: int) -> List[int]:
        return [t for t in self.branch_nodes if self.node_depth(t) == d]

    def descendants(self, t: int) -> List[int]:
        """Branch and leaf nodes strictly below t, in breadth-first order"""
        result: List[int] = []
        frontier = [t]
        while frontier:
            nxt = []
            for s in frontier:
                if not self.is_leaf(s):
                    nxt.extend((2 * s, 2 * s + 1))
            result.extend(nxt)
            frontier = nxt
        return result

    @cached_property
    def _ancestor_sides(self) -> Dict[int, Tuple[FrozenSet[int], FrozenSet[int]]]:
        sides: Dict[int, Tuple[FrozenSet[int], FrozenSet[int]]] = {1: (frozenset(), frozenset())}
        for t in range(2, self.n_nodes + 1):
            left, right = sides[t // 2]
            if t % 2 == 0:
                sides[t] = (left | {t // 2}, right)
            else:
                sides[t] = (left, right | {t // 2})
        return sides
