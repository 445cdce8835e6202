"""
Exception hierarchy for the ruletree package
"""
from typing import List, Optional


class RuleTreeError(Exception):
    """Base class for every error raised by ruletree"""

    exit_code: int = 1


class UsageError(RuleTreeError):
    """Invalid arguments or configuration"""

    exit_code = 1


class DatasetError(RuleTreeError):
    """Unreadable, malformed or degenerate data"""

    exit_code = 2


class BinarizationError(DatasetError):
    """Discretization or one-hot encoding failed"""


class TreeFormatError(DatasetError):
    """Malformed model file or tree invariant violation"""


class ModelBuildError(RuleTreeError):
    """The MIP model cannot be built for the given inputs"""

    exit_code = 1


class SolutionError(DatasetError):
    """Solution file cannot be parsed or does not satisfy the model"""

    def __init__(self, message: str, violations: Optional[List[str]] = None):
        super().__init__(message)
        self.violations = list(violations or [])


class InfeasibleError(RuleTreeError):
    """No tree satisfies the hyperparameters on the training data"""

    exit_code = 3


class SearchSpaceTooLarge(RuleTreeError):
    """Brute-force enumeration refused because the space exceeds its limit"""

    exit_code = 1


class EvaluationError(RuleTreeError):
    """Metric undefined on the evaluation set (zero denominator, bad labels)"""

    exit_code = 2
