"""
Search outcome types
"""
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

from src.ruletree.tree.tree import BooleanTree


class Status(str, Enum):
    OPTIMAL = "Optimal"
    FEASIBLE_TIME_LIMIT = "FeasibleTimeLimit"
    INFEASIBLE = "Infeasible"


@dataclass
class SearchStats:
    nodes: int = 0
    elapsed_s: float = 0.0
    incumbent_updates: int = 0
    candidates: int = 0
    workers: int = 1

    @property
    def nodes_per_s(self) -> float:
        return self.nodes / self.elapsed_s if self.elapsed_s > 0 else float(self.nodes)


@dataclass(frozen=True)
class SolveResult:
    """
    Best tree found with its objective (in the model's own sense) and dual bound

    For minimised objectives dual_bound <= objective, for maximised ones
    dual_bound >= objective. Optimal results have dual_bound == objective.
    """

    tree: BooleanTree
    objective: Fraction
    dual_bound: Fraction
    status: Status
    stats: SearchStats = field(default_factory=SearchStats)

    @property
    def gap(self) -> Fraction:
        return abs(self.objective - self.dual_bound) / max(Fraction(1), abs(self.objective))

    @property
    def optimal(self) -> bool:
        return self.status == Status.OPTIMAL
