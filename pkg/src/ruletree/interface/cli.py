"""
Command-line interface

    binarize        raw CSV -> binary CSV + binarization map
    train           binary CSV -> model file (+ optional LP / solution files)
    predict         model + data -> predictions CSV
    evaluate        model + labelled data -> metrics and confusion matrix
    show            print a model's rules
    emit-lp         binary CSV -> LP file
    solve-external  LP file + solution file -> model file
    benchmark       hyperparameter grid over one or more datasets

Exit codes: 0 ok, 1 usage, 2 data, 3 infeasible, 4 time limit hit (incumbent returned).
"""
import argparse
import os
import sys
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from loguru import logger
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from config.config import get_settings, load_env_file
from src.ruletree.binarization.binarizer import BinarizationMap, apply_map, binarize_dataset, write_binary_csv
from src.ruletree.data.dataset import CONTINUOUS, BinaryDataset, load_binary_csv, load_csv
from src.ruletree.exceptions import DatasetError, RuleTreeError, UsageError
from src.ruletree.interface.benchmark import RunRecord, load_experiment_config, run_benchmark
from src.ruletree.logging_setup import configure_logging
from src.ruletree.metrics.metrics import confusion, metric_report
from src.ruletree.mip.builder import build_model
from src.ruletree.mip.lp_io import emit_lp, read_lp
from src.ruletree.mip.objective import ObjectiveKind
from src.ruletree.mip.solution import check_assignment, encode_tree, extract_tree, parse_solution, write_solution
from src.ruletree.solver.result import Status
from src.ruletree.solver.search import create_solver
from src.ruletree.tree.model_io import load_tree, save_tree
from src.ruletree.tree.params import HyperParams
from src.ruletree.tree.tree import BooleanTree, equivalent_univariate_depth, predict_all, render_tree

EXIT_OK = 0
EXIT_TIME_LIMIT = 4

console = Console()


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that reports errors as UsageError instead of exiting with 2"""

    def error(self, message: str):
        raise UsageError(message)


def _add_hyperparams(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--depth", "-D", type=int, default=2, help="Maximal tree depth D")
    parser.add_argument("--f-max", type=int, default=3, help="Features per rule F_max")
    parser.add_argument("--s-min", type=int, default=1, help="Minimum instances per live leaf")
    parser.add_argument("--alpha", type=float, default=0.0, help="Penalty per selected feature")
    parser.add_argument("--fixed-threshold", type=int, default=None, help="Force b_t for every active split")
    parser.add_argument(
        "--objective", default="accuracy",
        help="accuracy | cost_sensitive | balanced_accuracy | f1",
    )
    parser.add_argument("--cost-fp", type=float, default=None, help="Cost of a false positive")
    parser.add_argument("--cost-fn", type=float, default=None, help="Cost of a false negative")


def _add_data(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", required=True, help="CSV file")
    parser.add_argument("--label", default="class", help="Label column name")
    parser.add_argument("--positive-label", default=None, help="Raw label mapped to class 1")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ruletree", description="Optimal classification trees with Boolean-rule splits")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING, ...")
    parser.add_argument("--log-file", default=None, help="Additional log file (DEBUG level)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("binarize", help="Discretize and one-hot encode a raw CSV")
    _add_data(p)
    p.add_argument("--out", required=True, help="Binary CSV output")
    p.add_argument("--map", dest="map_out", required=True, help="Binarization map output")
    p.add_argument("--workers", type=int, default=None)

    p = sub.add_parser("train", help="Learn a tree on binary data")
    _add_data(p)
    _add_hyperparams(p)
    p.add_argument("--budget", type=float, default=None, help="Time limit in seconds")
    p.add_argument("--workers", type=int, default=None, help="Search processes (env RULETREE_WORKERS)")
    p.add_argument("--out", required=True, help="Model file output")
    p.add_argument("--emit-lp", default=None, help="Also write the MIP as an LP file")
    p.add_argument("--emit-solution", default=None, help="Also write the tree as a MIP solution file")
    p.add_argument("--trace", default=None, help="CSV trace of incumbent and bound over time")
    p.add_argument("--record", default=None, help="Append the run record (JSON line) to this file")

    for name, text in (("predict", "Predict labels"), ("evaluate", "Score a model on labelled data")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--model", required=True)
        p.add_argument("--data", required=True)
        p.add_argument("--label", default="class")
        p.add_argument("--map", dest="map_in", default=None, help="Binarization map for raw input")
        if name == "predict":
            p.add_argument("--out", default=None, help="Predictions CSV (stdout if omitted)")
        else:
            p.add_argument("--cost-fp", type=float, default=1.0)
            p.add_argument("--cost-fn", type=float, default=1.0)

    p = sub.add_parser("show", help="Print a model's rules")
    p.add_argument("--model", required=True)

    p = sub.add_parser("emit-lp", help="Write the MIP for a dataset")
    _add_data(p)
    _add_hyperparams(p)
    p.add_argument("--out", required=True, help="LP file output")

    p = sub.add_parser("solve-external", help="Turn an external solver's solution into a model")
    p.add_argument("--lp", required=True, help="LP file written by emit-lp")
    p.add_argument("--solution", required=True, help="'name value' solution file")
    p.add_argument("--out", required=True, help="Model file output")

    p = sub.add_parser("benchmark", help="Run a hyperparameter grid")
    p.add_argument("--config", default=None, help="INI file with [data], [grid], [run] sections")
    p.add_argument("--data", nargs="*", default=None, help="Dataset CSV files")
    p.add_argument("--label", default=None)
    p.add_argument("--objective", default=None)
    p.add_argument("--seeds", default=None, help="Comma-separated seeds")
    p.add_argument("--budget", type=float, default=None, help="Seconds per grid point")
    p.add_argument("--output", default=None, help="Results directory")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--no-split", action="store_true", help="Use all rows as train, validation and test")
    return parser


def _hyperparams(args) -> HyperParams:
    costs = None
    if args.cost_fp is not None or args.cost_fn is not None:
        costs = (args.cost_fp if args.cost_fp is not None else 1.0, args.cost_fn if args.cost_fn is not None else 1.0)
    try:
        return HyperParams(
            depth=args.depth,
            f_max=args.f_max,
            s_min=args.s_min,
            alpha=args.alpha,
            costs=costs,
            fixed_threshold=args.fixed_threshold,
        )
    except ValidationError as e:
        raise UsageError(f"Invalid hyperparameters: {e.errors()[0]['msg']}") from e


def _objective(args, hp: HyperParams) -> ObjectiveKind:
    try:
        return ObjectiveKind.for_params(args.objective, hp)
    except RuleTreeError as e:
        raise UsageError(str(e)) from e


def cmd_binarize(args) -> int:
    settings = get_settings()
    raw = load_csv(args.data, args.label)
    data, bmap = binarize_dataset(
        raw, positive_label=args.positive_label, workers=args.workers or settings.workers
    )
    write_binary_csv(data, args.out, label_column=args.label)
    bmap.save(args.map_out)
    console.print(f"{data.n} rows, {data.n_features} binary columns, {len(bmap.dropped)} feature(s) dropped")
    return EXIT_OK


def cmd_train(args) -> int:
    settings = get_settings()
    hp = _hyperparams(args)
    obj = _objective(args, hp)
    train = load_binary_csv(args.data, args.label, args.positive_label)
    budget = args.budget if args.budget is not None else settings.budget_for_rows(train.n)
    if budget <= 0:
        raise UsageError(f"--budget must be positive, got {budget}")

    if args.emit_lp:
        emit_lp(build_model(train, hp, obj), args.emit_lp)

    solver = create_solver(workers=args.workers, trace_path=args.trace)
    result = solver.solve(train, hp, obj, budget)
    save_tree(result.tree, args.out)

    if args.emit_solution:
        model = build_model(train, hp, obj)
        assignment = encode_tree(model, result.tree, train)
        report = check_assignment(model, assignment)
        if not report.feasible:
            logger.error(f"Encoded tree violates {report.violations[:5]}")
        write_solution(model, assignment, args.emit_solution)

    record = RunRecord(
        dataset=os.path.splitext(os.path.basename(args.data))[0],
        n=train.n,
        n_features=train.n_features,
        n_classes=train.n_classes,
        depth=hp.depth,
        alpha=hp.alpha,
        f_max=hp.f_max,
        s_min=hp.s_min,
        objective=str(obj),
        objective_value=str(result.objective),
        gap=float(result.gap),
        status=result.status.value,
        wall_time_s=round(result.stats.elapsed_s, 3),
        model_path=args.out,
    )
    line = record.to_json_line()
    print(line)
    if args.record:
        with open(args.record, "a", encoding="utf-8") as handle:
            handle.write(line + "\n")
    return EXIT_TIME_LIMIT if result.status == Status.FEASIBLE_TIME_LIMIT else EXIT_OK


def dataset_for_model(tree: BooleanTree, path: str, label_column: str, map_path: Optional[str] = None) -> BinaryDataset:
    """
    Load rows to be scored by a model, aligning columns and classes with it

    Args:
        tree: Loaded model
        path: CSV with the label column
        label_column: Name of the label column
        map_path: Binarization map when the CSV holds raw features

    Returns:
        BinaryDataset whose class ids follow the model's class names
    """
    raw = load_csv(path, label_column, strict=False)
    if map_path:
        data = apply_map(BinarizationMap.load(map_path), raw)
        if data.n_features != tree.n_features:
            raise DatasetError(f"Map yields {data.n_features} columns, model expects {tree.n_features}")
        return data

    names = list(tree.feature_names) if tree.feature_names else raw.feature_names
    missing = [name for name in names if name not in raw.columns]
    if missing:
        raise DatasetError(f"Data lacks model column(s): {', '.join(missing[:5])}")
    if len(names) != tree.n_features:
        raise DatasetError(f"Data has {len(names)} feature columns, model expects {tree.n_features}")
    columns = []
    for name in names:
        values = raw.columns[name]
        if raw.kinds[name] != CONTINUOUS or not set(values) <= {0.0, 1.0}:
            raise DatasetError(f"Column '{name}' is not binary; pass --map for raw data")
        columns.append(np.asarray(values, dtype=np.uint8))

    class_names = list(tree.class_names) if tree.class_names else sorted(set(raw.labels))
    index = {name: k for k, name in enumerate(class_names)}
    unknown = sorted(set(raw.labels) - set(index))
    if unknown:
        raise DatasetError(f"Labels not known to the model: {', '.join(unknown)}")
    return BinaryDataset(
        x=np.column_stack(columns),
        y=np.array([index[label] for label in raw.labels], dtype=np.int64),
        n_classes=max(len(class_names), 2),
        feature_names=tuple(names),
        class_names=tuple(class_names) if len(class_names) >= 2 else (),
        strict=False,
    )


def cmd_predict(args) -> int:
    tree = load_tree(args.model)
    data = dataset_for_model(tree, args.data, args.label, args.map_in)
    predictions = predict_all(tree, data.x)
    names = tree.class_names or tuple(str(k) for k in range(max(predictions.max(initial=0) + 1, 2)))
    frame = pd.DataFrame({"prediction": [names[k] for k in predictions]})
    if args.out:
        frame.to_csv(args.out, index=False)
        logger.info(f"Wrote {len(frame)} predictions to {args.out}")
    else:
        sys.stdout.write(frame.to_csv(index=False))
    return EXIT_OK


def _fmt(value: Optional[Fraction]) -> str:
    return "undefined" if value is None else f"{float(value):.6f}"


def cmd_evaluate(args) -> int:
    tree = load_tree(args.model)
    data = dataset_for_model(tree, args.data, args.label, args.map_in)
    cm = confusion(data.y, predict_all(tree, data.x), n_classes=data.n_classes)
    report = metric_report(cm, costs=(Fraction(str(args.cost_fp)), Fraction(str(args.cost_fn))))

    table = Table(title=f"{os.path.basename(args.model)} on {os.path.basename(args.data)} ({data.n} rows)")
    table.add_column("metric")
    table.add_column("value", justify="right")
    for name, value in report.items():
        table.add_row(name, _fmt(value))
    console.print(table)

    matrix = Table(title="confusion matrix (rows = true, columns = predicted)")
    matrix.add_column("")
    labels = list(data.class_names) + [str(k) for k in range(len(data.class_names), cm.n_classes)]
    for name in labels:
        matrix.add_column(str(name), justify="right")
    for k, row in enumerate(cm.matrix):
        matrix.add_row(str(labels[k]), *[str(v) for v in row])
    console.print(matrix)
    return EXIT_OK


def cmd_show(args) -> int:
    tree = load_tree(args.model)
    console.print(render_tree(tree), markup=False, highlight=False)
    try:
        depth = str(equivalent_univariate_depth(tree))
    except RuleTreeError:
        depth = "0 (no active split)"
    console.print(f"selected features: {tree.n_selected_features}; equivalent univariate depth: {depth}")
    return EXIT_OK


def cmd_emit_lp(args) -> int:
    hp = _hyperparams(args)
    obj = _objective(args, hp)
    train = load_binary_csv(args.data, args.label, args.positive_label)
    model = build_model(train, hp, obj)
    emit_lp(model, args.out)
    for key, value in model.stats().items():
        logger.info(f"  {key}: {value}")
    return EXIT_OK


def cmd_solve_external(args) -> int:
    model = read_lp(args.lp)
    assignment = parse_solution(model, args.solution)
    report = check_assignment(model, assignment)
    if not report.feasible:
        for name in report.violations[:20]:
            logger.error(f"Violated: {name}")
    tree = extract_tree(model, assignment)
    save_tree(tree, args.out)
    console.print(f"objective {float(report.objective):.6f}; model written to {args.out}")
    return EXIT_OK


def cmd_benchmark(args) -> int:
    try:
        seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else None
    except ValueError as e:
        raise UsageError(f"--seeds must be comma-separated integers: {args.seeds}") from e
    config = load_experiment_config(
        args.config,
        datasets=args.data or None,
        label_column=args.label,
        objective=args.objective,
        seeds=seeds,
        budget_s=args.budget,
        output_dir=args.output,
        workers=args.workers,
        no_split=True if args.no_split else None,
    )
    _, overall, per_depth = run_benchmark(config)
    for title, frame in (("summary", overall), ("summary by depth", per_depth)):
        table = Table(title=title)
        for column in frame.columns:
            table.add_column(str(column))
        for row in frame.itertuples(index=False):
            table.add_row(*[f"{v:.4f}" if isinstance(v, float) else str(v) for v in row])
        console.print(table)
    return EXIT_OK


COMMANDS = {
    "binarize": cmd_binarize,
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "show": cmd_show,
    "emit-lp": cmd_emit_lp,
    "solve-external": cmd_solve_external,
    "benchmark": cmd_benchmark,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, run one command and map errors to exit codes"""
    settings = load_env_file()
    try:
        args = build_parser().parse_args(list(argv) if argv is not None else None)
    except UsageError as e:
        configure_logging(settings.log_level, settings.log_file)
        logger.error(f"Usage error: {e}")
        return e.exit_code
    configure_logging(args.log_level or settings.log_level, args.log_file or settings.log_file)
    try:
        return COMMANDS[args.command](args)
    except RuleTreeError as e:
        logger.error(f"{args.command} failed: {e}")
        return e.exit_code
    except KeyboardInterrupt:
        logger.warning("Interrupted")
        return 130
