"""
MIP formulations of the Boolean-rule tree problem

One builder covers the four objectives. The accuracy model uses a single
error variable e_t per leaf; the binary-class models use e_t0 (false
negatives at leaves labelled 0) and e_t1 (false positives at leaves
labelled 1). The F1 model adds the variable F1 and one bilinear constraint.

Variable names (features and instances 1-based, classes 0-based):
    a_{t}_f{j}  b_{t}  d_{t}  c_{t}_{k}  z_{i}_{t}  l_{t}
    e_{t} | e_{t}_{k}  M_{k}_{t}  N_{t}  F1
"""
from fractions import Fraction
from typing import List, Tuple

from loguru import logger

from src.ruletree.data.dataset import BinaryDataset
from src.ruletree.exceptions import ModelBuildError
from src.ruletree.mip.model_spec import ModelSpec, Sense, VarType
from src.ruletree.mip.objective import Kind, ObjectiveKind
from src.ruletree.solver.objectives import check_objective
from src.ruletree.tree.params import HyperParams
from src.ruletree.tree.topology import TreeTopology


def var_a(t: int, f: int) -> str:
    return f"a_{t}_f{f + 1}"


def var_b(t: int) -> str:
    return f"b_{t}"


def var_d(t: int) -> str:
    return f"d_{t}"


def var_c(t: int, k: int) -> str:
    return f"c_{t}_{k}"


def var_z(i: int, t: int) -> str:
    return f"z_{i + 1}_{t}"


def var_l(t: int) -> str:
    return f"l_{t}"


def var_e(t: int, k: int = None) -> str:
    return f"e_{t}" if k is None else f"e_{t}_{k}"


def var_m(k: int, t: int) -> str:
    return f"M_{k}_{t}"


def var_n(t: int) -> str:
    return f"N_{t}"


VAR_F1 = "F1"


class ModelBuilder:
    """Builds a ModelSpec for one training set, hyperparameter set and objective"""

    def __init__(self, train: BinaryDataset, hp: HyperParams, obj: ObjectiveKind):
        if train.n == 0:
            raise ModelBuildError("Cannot build a model on an empty training set")
        if hp.f_max > train.n_features:
            raise ModelBuildError(f"F_max={hp.f_max} exceeds the number of features ({train.n_features})")
        check_objective(train, obj)
        self.train = train
        self.hp = hp
        self.obj = obj
        self.topology = TreeTopology(hp.depth)
        self.model = ModelSpec()

    @property
    def per_class_errors(self) -> bool:
        return self.obj.kind != Kind.ACCURACY

    def build(self) -> ModelSpec:
        self._variables()
        self._structure()
        self._assignment()
        self._routing()
        self._counting()
        self._errors()
        if self.obj.kind == Kind.F1:
            self._f1_ratio()
        self._objective()
        self.model.meta.update({
            "depth": str(self.hp.depth),
            "features": str(self.train.n_features),
            "classes": str(self.train.n_classes),
            "rows": str(self.train.n),
            "f_max": str(self.hp.f_max),
            "s_min": str(self.hp.s_min),
            "objective": self.obj.kind.value,
        })
        stats = self.model.stats()
        logger.info(
            f"Built {self.obj} model: {len(self.model.variables)} variables "
            f"({stats['vars_binary']} binary), {len(self.model.all_constraints())} constraints"
        )
        return self.model

    def _variables(self) -> None:
        m, n, f_max = self.model, self.train.n, self.hp.f_max
        for t in self.topology.branch_nodes:
            for f in range(self.train.n_features):
                m.add_variable(var_a(t, f), VarType.BINARY)
        for t in self.topology.branch_nodes:
            m.add_variable(var_b(t), VarType.INTEGER, 0, f_max - 1)
        for t in self.topology.branch_nodes:
            m.add_variable(var_d(t), VarType.BINARY)
        for t in self.topology.leaves:
            for k in range(self.train.n_classes):
                m.add_variable(var_c(t, k), VarType.BINARY)
        for i in range(n):
            for t in self.topology.leaves:
                m.add_variable(var_z(i, t), VarType.BINARY)
        for t in self.topology.leaves:
            m.add_variable(var_l(t), VarType.BINARY)
        for t in self.topology.leaves:
            if self.per_class_errors:
                for k in (0, 1):
                    m.add_variable(var_e(t, k), VarType.CONTINUOUS, 0, n)
            else:
                m.add_variable(var_e(t), VarType.CONTINUOUS, 0, n)
        for k in range(self.train.n_classes):
            for t in self.topology.leaves:
                m.add_variable(var_m(k, t), VarType.CONTINUOUS, 0, n)
        for t in self.topology.leaves:
            m.add_variable(var_n(t), VarType.CONTINUOUS, 0, n)
        if self.obj.kind == Kind.F1:
            m.add_variable(VAR_F1, VarType.CONTINUOUS, 0, 1)

    def _structure(self) -> None:
        m, f_max, topo = self.model, self.hp.f_max, self.topology
        for t in topo.branch_nodes:
            terms = [(var_a(t, f), 1) for f in range(self.train.n_features)]
            m.add_constraint(f"c5a_{t}", "5a", terms + [(var_d(t), -f_max)], Sense.LE, 0)
        for t in topo.branch_nodes:
            m.add_constraint(f"c5b_{t}", "5b", [(var_b(t), 1), (var_d(t), -(f_max - 1))], Sense.LE, 0)
        for t in topo.branch_nodes:
            if t > 1:
                m.add_constraint(f"c5c_{t}", "5c", [(var_d(t), 1), (var_d(t // 2), -1)], Sense.LE, 0)
        if self.hp.fixed_threshold is not None:
            for t in topo.branch_nodes:
                m.add_constraint(
                    f"fix_{t}", "fix", [(var_b(t), 1), (var_d(t), -self.hp.fixed_threshold)], Sense.EQ, 0
                )
        for t in topo.leaves:
            terms = [(var_c(t, k), 1) for k in range(self.train.n_classes)]
            m.add_constraint(f"c5d_{t}", "5d", terms + [(var_l(t), -1)], Sense.EQ, 0)
        for t in topo.leaves:
            parents = sorted(topo.potential_parents(t))
            # the leftmost leaf also hosts the all-inactive tree
            if t != topo.leftmost_leaf:
                m.add_constraint(
                    f"c5e_{t}", "5e", [(var_l(t), 1)] + [(var_d(s), -1) for s in parents], Sense.LE, 0
                )
            m.add_constraint(
                f"c5f_{t}", "5f", [(var_l(t), self.hp.depth)] + [(var_d(s), -1) for s in parents], Sense.GE, 0
            )

    def _assignment(self) -> None:
        m, topo = self.model, self.topology
        for i in range(self.train.n):
            m.add_constraint(f"c5g_{i + 1}", "5g", [(var_z(i, t), 1) for t in topo.leaves], Sense.EQ, 1)
        for i in range(self.train.n):
            for t in topo.leaves:
                m.add_constraint(f"c5h_{i + 1}_{t}", "5h", [(var_z(i, t), 1), (var_l(t), -1)], Sense.LE, 0)
        for t in topo.leaves:
            terms = [(var_z(i, t), 1) for i in range(self.train.n)]
            m.add_constraint(f"c5i_{t}", "5i", terms + [(var_l(t), -self.hp.s_min)], Sense.GE, 0)

    def _feature_sum(self, i: int, s: int) -> List[Tuple[str, int]]:
        row = self.train.x[i]
        return [(var_a(s, f), 1) for f in range(self.train.n_features) if row[f]]

    def _routing(self) -> None:
        m, topo, f_max = self.model, self.topology, self.hp.f_max
        for t in topo.leaves:
            right = sorted(topo.right_ancestors(t))
            left = sorted(topo.left_ancestors(t))
            for i in range(self.train.n):
                for s in right:
                    terms = self._feature_sum(i, s) + [(var_b(s), -1), (var_d(s), -1), (var_z(i, t), -f_max)]
                    m.add_constraint(f"c5j_{i + 1}_{t}_{s}", "5j", terms, Sense.GE, -f_max)
                for s in left:
                    terms = self._feature_sum(i, s) + [(var_b(s), -1), (var_z(i, t), f_max)]
                    m.add_constraint(f"c5k_{i + 1}_{t}_{s}", "5k", terms, Sense.LE, f_max)

    def _counting(self) -> None:
        m, topo, y = self.model, self.topology, self.train.y
        for k in range(self.train.n_classes):
            for t in topo.leaves:
                terms = [(var_z(i, t), -1) for i in range(self.train.n) if y[i] == k]
                m.add_constraint(f"c5l_{k}_{t}", "5l", [(var_m(k, t), 1)] + terms, Sense.EQ, 0)
        for t in topo.leaves:
            terms = [(var_z(i, t), -1) for i in range(self.train.n)]
            m.add_constraint(f"c5m_{t}", "5m", [(var_n(t), 1)] + terms, Sense.EQ, 0)

    def _errors(self) -> None:
        m, topo, n = self.model, self.topology, self.train.n
        for t in topo.leaves:
            if not self.per_class_errors:
                e = var_e(t)
                for k in range(self.train.n_classes):
                    m.add_constraint(
                        f"c5n_{t}_{k}", "5n",
                        [(e, 1), (var_n(t), -1), (var_m(k, t), 1), (var_c(t, k), -n)], Sense.GE, -n,
                    )
                for k in range(self.train.n_classes):
                    m.add_constraint(
                        f"c5o_{t}_{k}", "5o", [(e, 1), (var_n(t), -1), (var_m(k, t), 1)], Sense.LE, 0
                    )
                m.add_constraint(f"c5p_{t}", "5p", [(e, 1)], Sense.GE, 0)
                continue
            for k in (0, 1):
                e = var_e(t, k)
                m.add_constraint(
                    f"err_lo_{t}_{k}", "err",
                    [(e, 1), (var_n(t), -1), (var_m(k, t), 1), (var_c(t, k), -n)], Sense.GE, -n,
                )
                m.add_constraint(
                    f"err_hi_{t}_{k}", "err", [(e, 1), (var_n(t), -1), (var_m(k, t), 1)], Sense.LE, 0
                )
                m.add_constraint(f"err_lab_{t}_{k}", "err", [(e, 1), (var_c(t, k), -n)], Sense.LE, 0)
                m.add_constraint(f"err_nn_{t}_{k}", "err", [(e, 1)], Sense.GE, 0)

    def _f1_ratio(self) -> None:
        # F1 * (2n+ + sum e_t1 - sum e_t0) <= 2(n+ - sum e_t0)
        n_pos = self.train.n_pos
        leaves = list(self.topology.leaves)
        terms = [(VAR_F1, 2 * n_pos)] + [(var_e(t, 0), 2) for t in leaves]
        quad = [(VAR_F1, var_e(t, 1), 1) for t in leaves] + [(VAR_F1, var_e(t, 0), -1) for t in leaves]
        self.model.add_quadratic("qf1", "f1", terms, quad, Sense.LE, 2 * n_pos)

    def _objective(self) -> None:
        alpha = self.hp.alpha_exact
        n = self.train.n
        complexity = [
            (var_a(t, f), alpha) for t in self.topology.branch_nodes for f in range(self.train.n_features)
        ]
        leaves = list(self.topology.leaves)
        kind = self.obj.kind
        if kind == Kind.ACCURACY:
            terms = [(var_e(t), Fraction(1, n)) for t in leaves]
            self.model.set_objective("min", terms + complexity)
        elif kind == Kind.COST_SENSITIVE:
            terms = []
            for t in leaves:
                terms.append((var_e(t, 1), self.obj.cost_fp / n))
                terms.append((var_e(t, 0), self.obj.cost_fn / n))
            self.model.set_objective("min", terms + complexity)
        elif kind == Kind.BALANCED_ACCURACY:
            terms = []
            for t in leaves:
                terms.append((var_e(t, 0), -Fraction(1, 2 * self.train.n_pos)))
                terms.append((var_e(t, 1), -Fraction(1, 2 * self.train.n_neg)))
            self.model.set_objective("max", terms + [(v, -c) for v, c in complexity], constant=1)
        else:
            self.model.set_objective("max", [(VAR_F1, 1)] + [(v, -c) for v, c in complexity])


def build_model(train: BinaryDataset, hp: HyperParams, obj: ObjectiveKind) -> ModelSpec:
    """
    Build the MIP for one objective

    Args:
        train: Binary training data
        hp: Hyperparameters
        obj: Objective kind

    Returns:
        ModelSpec ready for emit_lp or check_assignment
    """
    return ModelBuilder(train, hp, obj).build()


def create_model_builder(train: BinaryDataset, hp: HyperParams, obj: ObjectiveKind) -> ModelBuilder:
    """Create a model builder instance"""
    return ModelBuilder(train, hp, obj)
