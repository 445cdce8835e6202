from fractions import Fraction

import pytest

from src.ruletree.exceptions import ModelBuildError, SolutionError
from src.ruletree.mip.builder import build_model, var_a, var_b, var_c, var_d, var_l
from src.ruletree.mip.lp_io import dumps_lp, emit_lp, family_of, read_lp
from src.ruletree.mip.objective import ObjectiveKind
from src.ruletree.mip.solution import (
    Assignment,
    check_assignment,
    encode_tree,
    extract_tree,
    parse_solution,
    write_solution,
    zero_assignment,
)
from src.ruletree.tree.params import HyperParams
from src.ruletree.tree.topology import TreeTopology
from src.ruletree.tree.tree import BooleanTree, SplitRule, canonicalize, predict_all, single_leaf_tree

ALL_OBJECTIVES = [
    ObjectiveKind.accuracy(),
    ObjectiveKind.cost_sensitive(1, 3),
    ObjectiveKind.balanced_accuracy(),
    ObjectiveKind.f1(),
]


def test_example1_variable_counts(example1):
    model = build_model(example1, HyperParams(depth=1, f_max=3), ObjectiveKind.accuracy())
    assert len(model.names_with_prefix("z_")) == 20
    assert len(model.names_with_prefix("a_")) == 5
    stats = model.stats()
    assert stats["vars_integer"] == 1
    assert stats["cons_5g"] == 10
    assert stats["quadratic"] == 0
    assert model.meta["depth"] == "1" and model.meta["features"] == "5"


def test_leftmost_leaf_has_no_liveness_cap(example1):
    model = build_model(example1, HyperParams(depth=2, f_max=2), ObjectiveKind.accuracy())
    names = {c.name for c in model.constraints}
    assert "c5e_4" not in names
    assert {"c5e_5", "c5e_6", "c5e_7"} <= names


def test_example1_optimal_assignment_is_feasible(example1, example1_tree):
    hp = HyperParams(depth=1, f_max=3, alpha=0.01)
    model = build_model(example1, hp, ObjectiveKind.accuracy())
    report = check_assignment(model, encode_tree(model, example1_tree, example1))
    assert report.feasible, report.violations
    assert report.objective == Fraction(3, 100)


def test_wrong_threshold_is_infeasible(example1, example1_tree):
    model = build_model(example1, HyperParams(depth=1, f_max=3), ObjectiveKind.accuracy())
    values = dict(encode_tree(model, example1_tree, example1).values)
    values[var_b(1)] = Fraction(2)
    report = check_assignment(model, Assignment(values))
    assert not report.feasible
    assert any(name.startswith("c5j_") or name.startswith("c5k_") for name in report.violations)


def test_zero_assignment_violates_row_assignment(example1):
    model = build_model(example1, HyperParams(depth=1, f_max=3), ObjectiveKind.accuracy())
    report = check_assignment(model, zero_assignment(model))
    assert "c5g_1" in report.violations


def test_f1_model_has_one_quadratic(example1):
    model = build_model(example1, HyperParams(depth=1, f_max=2), ObjectiveKind.f1())
    assert len(model.quadratic) == 1
    assert model.quadratic[0].name == "qf1"
    assert model.objective.sense == "max"


def test_fixed_threshold_constraints(example1):
    model = build_model(example1, HyperParams(depth=2, f_max=2, fixed_threshold=0), ObjectiveKind.accuracy())
    assert model.stats()["cons_fix"] == 3


def test_builder_rejects_bad_inputs(example1, make_random):
    with pytest.raises(ModelBuildError):
        build_model(example1, HyperParams(depth=1, f_max=6), ObjectiveKind.accuracy())
    three = make_random(3, n=9, n_features=3, n_classes=3)
    with pytest.raises(ModelBuildError):
        build_model(three, HyperParams(depth=1, f_max=2), ObjectiveKind.f1())
    build_model(three, HyperParams(depth=1, f_max=2), ObjectiveKind.accuracy())


@pytest.mark.parametrize("obj", ALL_OBJECTIVES, ids=str)
def test_lp_text_round_trip(example1, obj):
    hp = HyperParams(depth=2, f_max=2, alpha=0.001, costs=(1, 3))
    model = build_model(example1, hp, obj)
    text = dumps_lp(model)
    again = read_lp(text)
    assert dumps_lp(again) == text
    assert again.meta == model.meta
    assert [c.name for c in again.all_constraints()] == [c.name for c in model.all_constraints()]
    assert again.objective == model.objective


def test_lp_is_deterministic(example1, tmp_path):
    hp = HyperParams(depth=1, f_max=3)
    first, second = tmp_path / "a.lp", tmp_path / "b.lp"
    emit_lp(build_model(example1, hp, ObjectiveKind.accuracy()), str(first))
    emit_lp(build_model(example1, hp, ObjectiveKind.accuracy()), str(second))
    assert first.read_bytes() == second.read_bytes()
    text = first.read_text(encoding="utf-8")
    assert text.startswith("\\ ruletree")
    assert "Subject To" in text and text.rstrip().endswith("End")


def test_family_of():
    assert family_of("c5j_3_4_1") == "5j"
    assert family_of("err_lo_4_0") == "err"
    assert family_of("qf1") == "f1"


def test_solution_file_round_trip(example1, example1_tree, tmp_path):
    model = build_model(example1, HyperParams(depth=1, f_max=3), ObjectiveKind.accuracy())
    assignment = encode_tree(model, example1_tree, example1)
    path = str(tmp_path / "example1.sol")
    write_solution(model, assignment, path)
    parsed = parse_solution(model, path)
    assert parsed == assignment
    assert extract_tree(model, parsed) == canonicalize(example1_tree)


def test_hand_written_solution(example1, tmp_path):
    model = build_model(example1, HyperParams(depth=1, f_max=3), ObjectiveKind.accuracy())
    rows_right = {4, 6, 7, 8, 9, 10}
    lines = [f"{var_a(1, f)} 1" for f in (0, 1, 2)]
    lines += [f"{var_b(1)} 1", f"{var_d(1)} 1", f"{var_c(2, 0)} 1", f"{var_c(3, 1)} 1", "l_2 1", "l_3 1"]
    lines += [f"z_{i}_{3 if i in rows_right else 2} 1" for i in range(1, 11)]
    lines += ["M_0_2 4", "M_1_3 6", "N_2 4", "N_3 6  # right leaf"]
    path = tmp_path / "hand.sol"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    tree = extract_tree(model, parse_solution(model, str(path)))
    assert tree.rule(1).features == (0, 1, 2)
    assert tree.rule(1).threshold == 1
    assert tree.leaf_labels == (0, 1)


@pytest.mark.parametrize(
    "line, message",
    [("nosuchvar 1", "unknown variable"), ("b_1 one", "unparseable"), ("b_1", "expected")],
)
def test_parse_solution_errors(example1, tmp_path, line, message):
    model = build_model(example1, HyperParams(depth=1, f_max=3), ObjectiveKind.accuracy())
    path = tmp_path / "bad.sol"
    path.write_text(line + "\n", encoding="utf-8")
    with pytest.raises(SolutionError, match=message):
        parse_solution(model, str(path))


def test_extract_rejects_infeasible(example1):
    model = build_model(example1, HyperParams(depth=1, f_max=3), ObjectiveKind.accuracy())
    with pytest.raises(SolutionError) as info:
        extract_tree(model, zero_assignment(model))
    assert "c5g_1" in info.value.violations


def test_solve_external_on_reread_model(example1, example1_tree, tmp_path):
    hp = HyperParams(depth=1, f_max=3)
    built = build_model(example1, hp, ObjectiveKind.balanced_accuracy())
    lp_path = str(tmp_path / "m.lp")
    emit_lp(built, lp_path)
    reread = read_lp(lp_path)
    assignment = encode_tree(built, example1_tree, example1)
    report = check_assignment(reread, assignment)
    assert report.feasible
    assert report.objective == 1
    assert extract_tree(reread, assignment) == canonicalize(example1_tree)


def test_fractional_binary_is_rejected(example1, example1_tree):
    model = build_model(example1, HyperParams(depth=1, f_max=3), ObjectiveKind.accuracy())
    values = dict(encode_tree(model, example1_tree, example1).values)
    values[var_d(1)] = Fraction(2, 5)
    with pytest.raises(SolutionError, match="infeasible") as info:
        extract_tree(model, Assignment(values))
    assert f"non-integral binary:{var_d(1)}" in info.value.violations


def test_dead_root_split_decodes_to_single_leaf(example1):
    model = build_model(example1, HyperParams(depth=1, f_max=3, s_min=0), ObjectiveKind.accuracy())
    leaf = single_leaf_tree(1, 1, 5)
    values = dict(encode_tree(model, leaf, example1).values)
    values.update({var_d(1): Fraction(1), var_l(3): Fraction(1), var_c(3, 0): Fraction(1)})
    assignment = Assignment(values)
    assert check_assignment(model, assignment).feasible
    assert extract_tree(model, assignment) == canonicalize(leaf)


def test_dead_split_lifts_its_left_subtree(example1, example1_tree):
    model = build_model(example1, HyperParams(depth=2, f_max=3, s_min=0), ObjectiveKind.accuracy())
    everything_left = SplitRule(features=(), threshold=0, active=True)
    raw = BooleanTree(
        topology=TreeTopology(2),
        rules=(everything_left, example1_tree.rule(1), SplitRule.inactive()),
        leaf_labels=(0, 1, 0, None),
        n_features=5,
    )
    assignment = encode_tree(model, raw, example1)
    assert check_assignment(model, assignment).feasible
    tree = extract_tree(model, assignment)
    expected = BooleanTree(
        topology=TreeTopology(2),
        rules=(example1_tree.rule(1), SplitRule.inactive(), SplitRule.inactive()),
        leaf_labels=(0, None, 1, None),
        n_features=5,
    )
    assert tree == canonicalize(expected)
    assert predict_all(tree, example1.x).tolist() == example1.y.tolist()
