import numpy as np
import pytest

from src.ruletree.exceptions import TreeFormatError
from src.ruletree.tree.model_io import dumps_tree, load_tree, loads_tree, save_tree
from src.ruletree.tree.params import HyperParams
from src.ruletree.tree.topology import TreeTopology
from src.ruletree.tree.tree import (
    BooleanTree,
    SplitRule,
    canonicalize,
    equivalent_univariate_depth,
    predict,
    predict_all,
    render_tree,
    route,
    route_all,
    single_leaf_tree,
)


def test_topology_index_sets():
    topo = TreeTopology(2)
    assert list(topo.branch_nodes) == [1, 2, 3]
    assert list(topo.leaves) == [4, 5, 6, 7]
    assert topo.left_ancestors(6) == {3}
    assert topo.right_ancestors(6) == {1}
    assert topo.ancestors(5) == {1, 2}
    assert topo.potential_parents(4) == {1, 2}
    assert topo.potential_parents(5) == {2}
    assert topo.potential_parents(6) == {1, 3}
    assert topo.potential_parents(7) == {3}
    assert topo.subtree_leftmost_leaf(3) == 6


def test_topology_rejects_depth_zero():
    with pytest.raises(TreeFormatError):
        TreeTopology(0)


def test_split_rule_invariants():
    with pytest.raises(TreeFormatError):
        SplitRule.split((0, 0), 0)
    with pytest.raises(TreeFormatError):
        SplitRule.split((0, 1), 2)
    with pytest.raises(TreeFormatError):
        SplitRule(features=(1,), threshold=0, active=False)


def test_example1_routing(example1_tree, example1):
    assert route(example1_tree, (0, 0, 0, 1, 0)) == 2
    assert predict(example1_tree, (0, 0, 0, 1, 0)) == 0
    assert route(example1_tree, (1, 1, 1, 0, 1)) == 3
    assert predict(example1_tree, (1, 1, 1, 0, 1)) == 1
    assert predict_all(example1_tree, example1.x).tolist() == example1.y.tolist()


def test_example2_routing(example2_tree):
    x = (1, 0, 0, 1, 1)
    assert route(example2_tree, x) == 7
    assert route(example2_tree, (0, 0, 1, 1, 1)) == 4
    assert route(example2_tree, (0, 1, 0, 1, 0)) == 6


def test_route_all_matches_route(example2_tree):
    rng = np.random.default_rng(0)
    X = rng.integers(0, 2, size=(40, 5))
    assert route_all(example2_tree, X).tolist() == [route(example2_tree, row) for row in X]


def test_route_rejects_wrong_width(example1_tree):
    with pytest.raises(TreeFormatError):
        route(example1_tree, (0, 1))


def test_equivalent_univariate_depth(example2_tree, example1_tree):
    assert equivalent_univariate_depth(example2_tree) == 4
    assert equivalent_univariate_depth(example1_tree) == 4
    univariate = BooleanTree(
        topology=TreeTopology(3),
        rules=(SplitRule.split((0,), 0), SplitRule.split((1,), 0), SplitRule.inactive(),
               SplitRule.inactive(), SplitRule.inactive(), SplitRule.inactive(), SplitRule.inactive()),
        leaf_labels=(0, None, 1, None, 0, None, None, None),
        n_features=3,
    )
    univariate.validate()
    assert equivalent_univariate_depth(univariate) == 2


def test_equivalent_depth_needs_active_split():
    with pytest.raises(TreeFormatError):
        equivalent_univariate_depth(single_leaf_tree(2, 1, 4))


def test_live_leaves_and_validate(example2_tree):
    assert example2_tree.live_leaves() == [4, 6, 7]
    assert example2_tree.n_selected_features == 4
    example2_tree.validate()
    broken = BooleanTree(
        topology=TreeTopology(2),
        rules=(SplitRule.inactive(), SplitRule.split((0,), 0), SplitRule.inactive()),
        leaf_labels=(0, 1, None, None),
        n_features=2,
    )
    with pytest.raises(TreeFormatError, match="below inactive"):
        broken.validate()


def test_canonicalize_sorts_and_clears():
    messy = BooleanTree(
        topology=TreeTopology(2),
        rules=(SplitRule.inactive(), SplitRule.split((2, 0), 1), SplitRule.inactive()),
        leaf_labels=(0, 1, 1, 0),
        n_features=3,
    )
    clean = canonicalize(messy)
    assert clean.rules == (SplitRule.inactive(),) * 3
    assert clean.leaf_labels == (0, None, None, None)
    clean.validate()
    unsorted = BooleanTree(
        topology=TreeTopology(1),
        rules=(SplitRule.split((2, 0), 0),),
        leaf_labels=(0, 1),
        n_features=3,
    )
    assert canonicalize(unsorted).rule(1).features == (0, 2)


def test_single_leaf_tree_predicts_constant():
    tree = single_leaf_tree(2, 1, 3)
    tree.validate()
    X = np.array([[0, 0, 0], [1, 1, 1]])
    assert predict_all(tree, X).tolist() == [1, 1]
    assert tree.live_leaves() == [4]


def test_render_tree(example1_tree):
    text = render_tree(example1_tree)
    assert text.splitlines() == ["if f1 + f2 + f3 <= 1:", "    predict 0", "else:", "    predict 1"]


def test_model_round_trip(tmp_path, example1_tree, example2_tree):
    for tree in (example1_tree, example2_tree):
        path = str(tmp_path / "model.txt")
        save_tree(tree, path)
        loaded = load_tree(path)
        assert loaded == canonicalize(tree)
        assert loaded.feature_names == tree.feature_names
        assert dumps_tree(loaded) == dumps_tree(tree)


def test_model_format_is_readable(example1_tree):
    text = dumps_tree(example1_tree)
    assert "node 1 split 0,1,2 le 1" in text
    assert "leaf 2 label 0" in text


@pytest.mark.parametrize(
    "text",
    [
        "",
        "not a model\n",
        "# ruletree model v1\ndepth 1\n",
        "# ruletree model v1\ndepth 1\nfeatures 2\nnode 1 split 0,1 le 5\nleaf 2 label 0\nleaf 3 label 1\n",
        "# ruletree model v1\ndepth 1\nfeatures 2\nnode 1 inactive\nleaf 2 label 0\nleaf 3 label 1\n",
        "# ruletree model v1\ndepth 1\nfeatures 2\nnode 1 split 0 le 0\nleaf 2 label 0\n",
    ],
)
def test_loads_tree_rejects_malformed(text):
    with pytest.raises(TreeFormatError):
        loads_tree(text)


def test_load_tree_missing_file():
    with pytest.raises(TreeFormatError):
        load_tree("/nonexistent/model.txt")


def test_hyperparams_validation():
    with pytest.raises(ValueError):
        HyperParams(depth=0)
    with pytest.raises(ValueError):
        HyperParams(f_max=2, fixed_threshold=2)
    with pytest.raises(ValueError):
        HyperParams(costs=(0.0, 1.0))
    hp = HyperParams(alpha=0.001)
    assert hp.alpha_exact.denominator == 1000
