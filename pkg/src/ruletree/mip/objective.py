"""
Objective kinds supported by the formulations and the search
"""
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Optional, Tuple

from src.ruletree.exceptions import ModelBuildError
from src.ruletree.tree.params import HyperParams, exact


class Kind(str, Enum):
    ACCURACY = "accuracy"
    COST_SENSITIVE = "cost_sensitive"
    BALANCED_ACCURACY = "balanced_accuracy"
    F1 = "f1"


@dataclass(frozen=True)
class ObjectiveKind:
    """Objective of a learning problem; costs are used by COST_SENSITIVE only"""

    kind: Kind = Kind.ACCURACY
    cost_fp: Fraction = Fraction(1)
    cost_fn: Fraction = Fraction(1)

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "cost_fp", exact(self.cost_fp))
        object.__setattr__(self, "cost_fn", exact(self.cost_fn))
        if self.kind == Kind.COST_SENSITIVE and (self.cost_fp <= 0 or self.cost_fn <= 0):
            raise ModelBuildError(f"Costs must be positive, got C_FP={self.cost_fp}, C_FN={self.cost_fn}")

    @classmethod
    def accuracy(cls) -> "ObjectiveKind":
        return cls(Kind.ACCURACY)

    @classmethod
    def cost_sensitive(cls, cost_fp, cost_fn) -> "ObjectiveKind":
        return cls(Kind.COST_SENSITIVE, exact(cost_fp), exact(cost_fn))

    @classmethod
    def balanced_accuracy(cls) -> "ObjectiveKind":
        return cls(Kind.BALANCED_ACCURACY)

    @classmethod
    def f1(cls) -> "ObjectiveKind":
        return cls(Kind.F1)

    @classmethod
    def from_name(cls, name: str, costs: Optional[Tuple[float, float]] = None) -> "ObjectiveKind":
        """Parse a CLI/config name ("accuracy", "cost", "balanced", "f1" and the long forms)"""
        aliases = {
            "accuracy": Kind.ACCURACY, "acc": Kind.ACCURACY,
            "cost_sensitive": Kind.COST_SENSITIVE, "cost": Kind.COST_SENSITIVE, "mec": Kind.COST_SENSITIVE,
            "balanced_accuracy": Kind.BALANCED_ACCURACY, "balanced": Kind.BALANCED_ACCURACY,
            "f1": Kind.F1,
        }
        key = name.strip().lower().replace("-", "_")
        if key not in aliases:
            raise ModelBuildError(f"Unknown objective {name!r}")
        kind = aliases[key]
        if kind == Kind.COST_SENSITIVE:
            if costs is None:
                raise ModelBuildError("The cost-sensitive objective needs --cost-fp and --cost-fn")
            return cls.cost_sensitive(*costs)
        return cls(kind)

    @classmethod
    def for_params(cls, name: str, hp: HyperParams) -> "ObjectiveKind":
        return cls.from_name(name, hp.costs)

    @property
    def binary_only(self) -> bool:
        return self.kind != Kind.ACCURACY

    @property
    def maximize(self) -> bool:
        return self.kind in (Kind.BALANCED_ACCURACY, Kind.F1)

    @property
    def sense(self) -> str:
        return "max" if self.maximize else "min"

    def __str__(self) -> str:
        if self.kind == Kind.COST_SENSITIVE:
            return f"cost_sensitive(C_FP={self.cost_fp}, C_FN={self.cost_fn})"
        return self.kind.value
