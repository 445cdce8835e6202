"""
Hyperparameters of the Boolean-rule tree learner
"""
from fractions import Fraction
from typing import Optional, Tuple

from pydantic import BaseModel, ConfigDict, field_validator, model_validator


def exact(value) -> Fraction:
    """Exact rational for a user-supplied number (0.001 -> 1/1000)"""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(value)


class HyperParams(BaseModel):
    """
    D, F_max, S_min, alpha and optional misclassification costs

    fixed_threshold, when set, forces every active split to use exactly that
    threshold b_t (with F_max = 1 and fixed_threshold = 0 the learner is univariate).
    """

    model_config = ConfigDict(frozen=True)

    depth: int = 2
    f_max: int = 3
    s_min: int = 1
    alpha: float = 0.0
    costs: Optional[Tuple[float, float]] = None
    fixed_threshold: Optional[int] = None

    @field_validator("depth")
    @classmethod
    def _depth(cls, v: int) -> int:
        if v < 1:
            raise ValueError(f"depth must be >= 1, got {v}")
        return v

    @field_validator("f_max")
    @classmethod
    def _f_max(cls, v: int) -> int:
        if v < 1:
            raise ValueError(f"f_max must be >= 1, got {v}")
        return v

    @field_validator("s_min")
    @classmethod
    def _s_min(cls, v: int) -> int:
        if v < 0:
            raise ValueError(f"s_min must be >= 0, got {v}")
        return v

    @field_validator("alpha")
    @classmethod
    def _alpha(cls, v: float) -> float:
        if v < 0:
            raise ValueError(f"alpha must be >= 0, got {v}")
        return v

    @field_validator("costs")
    @classmethod
    def _costs(cls, v: Optional[Tuple[float, float]]) -> Optional[Tuple[float, float]]:
        if v is not None and (v[0] <= 0 or v[1] <= 0):
            raise ValueError(f"costs must be positive, got {v}")
        return v

    @model_validator(mode="after")
    def _threshold(self) -> "HyperParams":
        if self.fixed_threshold is not None and not 0 <= self.fixed_threshold <= self.f_max - 1:
            raise ValueError(f"fixed_threshold must lie in 0..{self.f_max - 1}, got {self.fixed_threshold}")
        return self

    @property
    def alpha_exact(self) -> Fraction:
        return exact(self.alpha)

    @property
    def costs_exact(self) -> Optional[Tuple[Fraction, Fraction]]:
        if self.costs is None:
            return None
        return exact(self.costs[0]), exact(self.costs[1])
