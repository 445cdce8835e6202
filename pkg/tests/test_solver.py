from fractions import Fraction

import numpy as np
import pytest

from src.ruletree.exceptions import InfeasibleError, ModelBuildError, SearchSpaceTooLarge, UsageError
from src.ruletree.mip.builder import build_model
from src.ruletree.mip.objective import ObjectiveKind
from src.ruletree.mip.solution import check_assignment, encode_tree, extract_tree
from src.ruletree.solver.bitset import column_mask, count_candidates, enumerate_candidates, feature_masks
from src.ruletree.solver.brute_force import brute_force, search_space_size
from src.ruletree.solver.objectives import ScoringContext, tree_objective
from src.ruletree.solver.result import Status
from src.ruletree.solver.search import BranchAndBoundSolver, SearchProblem, solve
from src.ruletree.tree.params import HyperParams
from src.ruletree.tree.tree import canonicalize, predict_all

OBJECTIVES = {
    "accuracy": ObjectiveKind.accuracy(),
    "cost": ObjectiveKind.cost_sensitive(1, 4),
    "balanced": ObjectiveKind.balanced_accuracy(),
    "f1": ObjectiveKind.f1(),
}


def _oracle_case(seed, make_random):
    """Random instance small enough for exhaustive enumeration"""
    rng = np.random.default_rng(10_000 + seed)
    depth = 1 + seed % 2
    n_features = int(rng.integers(2, 6 if depth == 1 else 5))
    data = make_random(seed, n=int(rng.integers(6, 13)), n_features=n_features)
    hp = HyperParams(
        depth=depth,
        f_max=int(rng.integers(1, 3)),
        s_min=int(rng.integers(0, 3)),
        alpha=[0.0, 0.01, 0.05][seed % 3],
        costs=(1, 4),
    )
    return data, hp


def test_column_mask_bits():
    assert column_mask(np.array([1, 0, 1, 1])) == 0b1101
    assert column_mask(np.zeros(9)) == 0


def test_candidate_enumeration(example1):
    candidates = enumerate_candidates(feature_masks(example1), example1.n, 3)
    assert len(candidates) == 55 == count_candidates(5, 3)
    keys = [c.order_key for c in candidates]
    assert keys == sorted(keys)
    rule = next(c for c in candidates if c.features == (0, 1, 2) and c.threshold == 1)
    right_rows = [i for i in range(example1.n) if rule.right >> i & 1]
    assert right_rows == [3, 5, 6, 7, 8, 9]
    assert len(enumerate_candidates(feature_masks(example1), example1.n, 3, fixed_threshold=0)) == 25


def test_example1_optimum(example1):
    result = solve(example1, HyperParams(depth=1, f_max=3), OBJECTIVES["accuracy"])
    assert result.status == Status.OPTIMAL
    assert result.objective == 0
    assert result.gap == 0
    assert result.tree.rule(1).features == (0, 1, 2)
    assert result.tree.rule(1).threshold == 1
    assert predict_all(result.tree, example1.x).tolist() == example1.y.tolist()


def test_example1_univariate_cannot_separate(example1):
    result = solve(example1, HyperParams(depth=1, f_max=1), OBJECTIVES["accuracy"])
    assert result.objective > 0
    assert result.objective == brute_force(example1, HyperParams(depth=1, f_max=1), OBJECTIVES["accuracy"]).objective


def test_example1_brute_force_count(example1):
    hp = HyperParams(depth=1, f_max=3)
    assert search_space_size(5, hp) == 56
    result = brute_force(example1, hp, OBJECTIVES["accuracy"])
    assert result.stats.nodes == 56
    assert result.objective == 0
    assert result.tree == solve(example1, hp, OBJECTIVES["accuracy"]).tree


def test_brute_force_refuses_large_spaces(example1):
    with pytest.raises(SearchSpaceTooLarge):
        brute_force(example1, HyperParams(depth=3, f_max=3), OBJECTIVES["accuracy"], limit=1000)


@pytest.mark.parametrize("seed", range(100))
@pytest.mark.parametrize("name", list(OBJECTIVES))
def test_search_matches_brute_force(seed, name, make_random):
    data, hp = _oracle_case(seed, make_random)
    obj = OBJECTIVES[name]
    try:
        expected = brute_force(data, hp, obj)
    except InfeasibleError:
        with pytest.raises(InfeasibleError):
            solve(data, hp, obj)
        return
    result = solve(data, hp, obj)
    assert result.status == Status.OPTIMAL
    assert result.objective == expected.objective
    assert result.tree.sort_key() == expected.tree.sort_key()
    assert tree_objective(result.tree, data, hp, obj) == result.objective


@pytest.mark.parametrize("seed", range(0, 40, 3))
@pytest.mark.parametrize("name", list(OBJECTIVES))
def test_search_tree_is_feasible_for_the_mip(seed, name, make_random):
    data, hp = _oracle_case(seed, make_random)
    hp = hp.model_copy(update={"s_min": 1})
    obj = OBJECTIVES[name]
    result = solve(data, hp, obj)
    model = build_model(data, hp, obj)
    assignment = encode_tree(model, result.tree, data)
    report = check_assignment(model, assignment)
    assert report.feasible, report.violations[:5]
    assert report.objective == result.objective
    assert extract_tree(model, assignment) == canonicalize(result.tree)


@pytest.mark.parametrize("seed", range(10))
def test_univariate_mode_uses_one_feature_per_node(seed, make_random):
    data, _ = _oracle_case(seed, make_random)
    result = solve(data, HyperParams(depth=2, f_max=1), OBJECTIVES["accuracy"])
    assert all(rule.n_features <= 1 for rule in result.tree.rules)


@pytest.mark.parametrize("seed", range(5))
def test_fixed_threshold_is_honoured(seed, make_random):
    data, _ = _oracle_case(seed, make_random)
    hp = HyperParams(depth=2, f_max=2, fixed_threshold=1)
    result = solve(data, hp, OBJECTIVES["accuracy"])
    assert all(rule.threshold == 1 for rule in result.tree.rules if rule.active)
    assert result.objective == brute_force(data, hp, OBJECTIVES["accuracy"]).objective


@pytest.mark.parametrize("workers", [2, 8])
def test_result_does_not_depend_on_workers(workers, make_random):
    data = make_random(42, n=14, n_features=4)
    hp = HyperParams(depth=2, f_max=2, alpha=0.01)
    for obj in (OBJECTIVES["accuracy"], OBJECTIVES["f1"]):
        serial = BranchAndBoundSolver(workers=1).solve(data, hp, obj)
        parallel = BranchAndBoundSolver(workers=workers).solve(data, hp, obj)
        assert parallel.status == Status.OPTIMAL
        assert parallel.objective == serial.objective
        assert parallel.tree == serial.tree


def test_tiny_budget_returns_incumbent(make_random):
    data = make_random(5, n=15, n_features=4)
    hp = HyperParams(depth=3, f_max=3)
    result = BranchAndBoundSolver(progress_every=1).solve(data, hp, OBJECTIVES["accuracy"], budget=1e-9)
    assert result.status == Status.FEASIBLE_TIME_LIMIT
    assert result.dual_bound <= result.objective
    result.tree.validate()
    assert tree_objective(result.tree, data, hp, OBJECTIVES["accuracy"]) == result.objective


def test_tiny_budget_bound_direction_for_maximisation(make_random):
    data = make_random(6, n=15, n_features=4)
    hp = HyperParams(depth=3, f_max=3)
    result = BranchAndBoundSolver(progress_every=1).solve(data, hp, OBJECTIVES["balanced"], budget=1e-9)
    assert result.status == Status.FEASIBLE_TIME_LIMIT
    assert result.dual_bound >= result.objective


def test_search_trace_is_written(example1, tmp_path):
    path = tmp_path / "trace.csv"
    BranchAndBoundSolver(progress_every=1, trace_path=str(path)).solve(
        example1, HyperParams(depth=1, f_max=2), OBJECTIVES["accuracy"]
    )
    header = path.read_text(encoding="utf-8").splitlines()[0]
    assert header == "elapsed_s,nodes,incumbent,dual_bound,gap"


@pytest.mark.parametrize("seed", range(8))
@pytest.mark.parametrize("name", list(OBJECTIVES))
def test_bounds_never_decrease_along_a_branch(seed, name, make_random):
    data, hp = _oracle_case(seed, make_random)
    problem = SearchProblem.build(data, hp.model_copy(update={"depth": 2}), OBJECTIVES[name])
    frontier = [problem.root()]
    while frontier:
        node = frontier.pop()
        if problem.is_complete(node):
            continue
        for child in problem.children(node)[:6]:
            assert child.bound >= node.bound
            frontier.append(child)


def test_f1_labelling_prefers_precise_leaves(example1):
    ctx = ScoringContext.build(example1, HyperParams(), OBJECTIVES["f1"])
    labels, value = ctx.f1_labelling([(2, 4, 0), (3, 0, 6)])
    assert labels == {2: 0, 3: 1}
    assert value == 1
    assert ctx.f1_upper_bound([(2, 4, 0)], free_pos=6) == 1


def test_infeasible_and_invalid_inputs(example1):
    with pytest.raises(InfeasibleError):
        solve(example1, HyperParams(depth=1, f_max=2, s_min=11), OBJECTIVES["accuracy"])
    with pytest.raises(ModelBuildError):
        solve(example1, HyperParams(depth=1, f_max=6), OBJECTIVES["accuracy"])
    with pytest.raises(UsageError):
        solve(example1, HyperParams(depth=1), OBJECTIVES["accuracy"], budget=0)
    with pytest.raises(UsageError):
        BranchAndBoundSolver(workers=0)


def test_single_leaf_when_splits_do_not_pay(example1):
    result = solve(example1, HyperParams(depth=1, f_max=1, alpha=1.0), OBJECTIVES["accuracy"])
    assert result.tree.active_nodes() == []
    assert result.objective == Fraction(4, 10)
