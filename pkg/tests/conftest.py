import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.ruletree.data.dataset import BinaryDataset
from src.ruletree.tree.topology import TreeTopology
from src.ruletree.tree.tree import BooleanTree, SplitRule

# Ten instances over five binary features, columns read top to bottom
EXAMPLE1_COLUMNS = {
    "f1": "0000111111",
    "f2": "0011010111",
    "f3": "0101001111",
    "f4": "1000110001",
    "f5": "0101010101",
}
EXAMPLE1_CLASS = "0001011111"


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running acceptance checks")


def example1_matrix() -> np.ndarray:
    return np.array([[int(c) for c in col] for col in EXAMPLE1_COLUMNS.values()], dtype=np.uint8).T


def example1_labels() -> np.ndarray:
    return np.array([int(c) for c in EXAMPLE1_CLASS], dtype=np.int64)


@pytest.fixture
def example1() -> BinaryDataset:
    return BinaryDataset(
        x=example1_matrix(),
        y=example1_labels(),
        n_classes=2,
        feature_names=tuple(EXAMPLE1_COLUMNS),
        class_names=("0", "1"),
    )


@pytest.fixture
def example1_csv(tmp_path) -> str:
    path = tmp_path / "example1.csv"
    x, y = example1_matrix(), example1_labels()
    lines = [",".join(list(EXAMPLE1_COLUMNS) + ["class"])]
    for row, label in zip(x, y):
        lines.append(",".join(str(v) for v in row) + f",{label}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return str(path)


@pytest.fixture
def example1_tree() -> BooleanTree:
    """Root rule f1 + f2 + f3 <= 1, left leaf 0, right leaf 1"""
    return BooleanTree(
        topology=TreeTopology(1),
        rules=(SplitRule.split((0, 1, 2), 1),),
        leaf_labels=(0, 1),
        n_features=5,
        feature_names=tuple(EXAMPLE1_COLUMNS),
        class_names=("0", "1"),
    )


@pytest.fixture
def example2_tree() -> BooleanTree:
    """Root f1 + f2 <= 0, right child f4 + f5 <= 1, left child inactive"""
    return BooleanTree(
        topology=TreeTopology(2),
        rules=(SplitRule.split((0, 1), 0), SplitRule.inactive(), SplitRule.split((3, 4), 1)),
        leaf_labels=(0, None, 0, 1),
        n_features=5,
    )


def random_binary(seed: int, n: int = None, n_features: int = None, n_classes: int = 2) -> BinaryDataset:
    """Small random dataset holding every class at least once"""
    rng = np.random.default_rng(seed)
    n = n if n is not None else int(rng.integers(6, 16))
    n_features = n_features if n_features is not None else int(rng.integers(2, 5))
    x = rng.integers(0, 2, size=(n, n_features))
    y = rng.integers(0, n_classes, size=n)
    y[:n_classes] = np.arange(n_classes)
    return BinaryDataset(x=x, y=y, n_classes=n_classes)


@pytest.fixture
def make_random():
    return random_binary
