"""
Hyperparameter-grid benchmark: split, binarize on the training rows, train
every grid point, select on validation, report test

Outputs in the results directory:
    runs.jsonl              one RunRecord per line
    summary.csv             best-on-validation test metric, mean over seeds
    summary_by_depth.csv    the same restricted to each depth
    splits/, maps/, models/ artefacts needed to re-verify every run
"""
import configparser
import itertools
import os
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

import pandas as pd
from loguru import logger
from pydantic import BaseModel, field_validator, model_validator
from tqdm import tqdm

from config.config import get_settings
from src.ruletree.binarization.binarizer import apply_map, binarize_dataset
from src.ruletree.data.dataset import (
    BinaryDataset,
    DatasetSplit,
    encode_labels,
    load_csv,
    split_indices,
    write_split_manifest,
)
from src.ruletree.exceptions import EvaluationError, ModelBuildError, UsageError
from src.ruletree.metrics.metrics import accuracy, balanced_accuracy, confusion, f1, mec
from src.ruletree.mip.objective import Kind, ObjectiveKind
from src.ruletree.solver.search import BranchAndBoundSolver
from src.ruletree.tree.model_io import save_tree
from src.ruletree.tree.params import HyperParams
from src.ruletree.tree.tree import BooleanTree, predict_all


class ExperimentConfig(BaseModel):
    """Datasets, objective, grid and run settings of one benchmark"""

    datasets: List[str]
    label_column: str = "class"
    positive_label: Optional[str] = None
    objective: str = "accuracy"
    costs: Optional[Tuple[float, float]] = None
    depths: List[int] = [1, 2, 3, 4]
    alphas: List[float] = [0.001, 0.01]
    f_maxes: List[int] = [3, 5]
    s_min: int = 1
    seeds: List[int] = [0, 1, 2, 3, 4]
    budget_s: Optional[float] = None
    fractions: Tuple[float, float, float] = (0.5, 0.25, 0.25)
    no_split: bool = False
    output_dir: str = "./results"
    workers: int = 1

    @field_validator("datasets", "depths", "alphas", "f_maxes", "seeds")
    @classmethod
    def _non_empty(cls, v: List) -> List:
        if not v:
            raise ValueError("must not be empty")
        return v

    @field_validator("seeds")
    @classmethod
    def _distinct(cls, v: List[int]) -> List[int]:
        if len(set(v)) != len(v):
            raise ValueError(f"seeds must be distinct, got {v}")
        return v

    @field_validator("budget_s")
    @classmethod
    def _budget(cls, v: Optional[float]) -> Optional[float]:
        if v is not None and v <= 0:
            raise ValueError(f"budget must be positive, got {v}")
        return v

    @model_validator(mode="after")
    def _objective(self) -> "ExperimentConfig":
        ObjectiveKind.from_name(self.objective, self.costs)
        return self

    def objective_kind(self) -> ObjectiveKind:
        return ObjectiveKind.from_name(self.objective, self.costs)

    def grid(self) -> List[Tuple[int, float, int]]:
        """(depth, alpha, f_max) in selection-tie order"""
        return list(itertools.product(self.depths, self.alphas, self.f_maxes))


def _split_list(value: str, cast) -> List:
    return [cast(item.strip()) for item in value.split(",") if item.strip()]


def load_experiment_config(path: Optional[str] = None, **overrides) -> ExperimentConfig:
    """
    Read an INI benchmark file ([data], [grid], [run]) and apply overrides

    Args:
        path: INI file, or None to start from defaults
        **overrides: ExperimentConfig fields that win over the file (None values ignored)

    Returns:
        Validated ExperimentConfig
    """
    values: Dict = {}
    if path is not None:
        if not os.path.exists(path):
            raise UsageError(f"Config file not found: {path}")
        parser = configparser.ConfigParser()
        try:
            parser.read(path, encoding="utf-8")
        except configparser.Error as e:
            raise UsageError(f"Cannot parse config {path}: {e}") from e
        data = parser["data"] if parser.has_section("data") else {}
        grid = parser["grid"] if parser.has_section("grid") else {}
        run = parser["run"] if parser.has_section("run") else {}
        try:
            if "datasets" in data:
                values["datasets"] = _split_list(data["datasets"], str)
            if "label" in data:
                values["label_column"] = data["label"]
            if "positive_label" in data:
                values["positive_label"] = data["positive_label"]
            if "objective" in grid:
                values["objective"] = grid["objective"]
            if "cost_fp" in grid or "cost_fn" in grid:
                values["costs"] = (float(grid.get("cost_fp", "1")), float(grid.get("cost_fn", "1")))
            if "depths" in grid:
                values["depths"] = _split_list(grid["depths"], int)
            if "alphas" in grid:
                values["alphas"] = _split_list(grid["alphas"], float)
            if "f_max" in grid:
                values["f_maxes"] = _split_list(grid["f_max"], int)
            if "s_min" in grid:
                values["s_min"] = int(grid["s_min"])
            if "seeds" in run:
                values["seeds"] = _split_list(run["seeds"], int)
            if "budget" in run:
                values["budget_s"] = float(run["budget"])
            if "fractions" in run:
                values["fractions"] = tuple(_split_list(run["fractions"], float))
            if "no_split" in run:
                values["no_split"] = run["no_split"].strip().lower() in ("1", "true", "yes", "on")
            if "output" in run:
                values["output_dir"] = run["output"]
            if "workers" in run:
                values["workers"] = int(run["workers"])
        except ValueError as e:
            raise UsageError(f"Bad value in {path}: {e}") from e
    values.update({k: v for k, v in overrides.items() if v is not None})
    values.setdefault("output_dir", get_settings().results_dir)
    values.setdefault("workers", get_settings().workers)
    try:
        return ExperimentConfig(**values)
    except (ValueError, ModelBuildError) as e:
        raise UsageError(f"Invalid benchmark configuration: {e}") from e


class RunRecord(BaseModel):
    """One trained grid point, serialised as a single JSON line"""

    dataset: str
    n: int
    n_features: int
    n_classes: int
    seed: Optional[int] = None
    depth: int
    alpha: float
    f_max: int
    s_min: int
    objective: str
    train_metric: Optional[float] = None
    validation_metric: Optional[float] = None
    test_metric: Optional[float] = None
    objective_value: str
    gap: float
    status: str
    wall_time_s: float
    model_path: Optional[str] = None

    def to_json_line(self) -> str:
        return self.model_dump_json()


def selection_metric(tree: BooleanTree, data: BinaryDataset, obj: ObjectiveKind) -> Optional[Fraction]:
    """
    The objective's own metric on a data split, oriented so larger is better

    Cost-sensitive runs are scored by -MEC/n. Undefined metrics give None.
    """
    if data.n == 0:
        return None
    cm = confusion(data.y, predict_all(tree, data.x), n_classes=data.n_classes)
    try:
        if obj.kind == Kind.ACCURACY:
            return accuracy(cm)
        if obj.kind == Kind.COST_SENSITIVE:
            return -mec(cm, obj.cost_fp, obj.cost_fn) / data.n
        if obj.kind == Kind.BALANCED_ACCURACY:
            return balanced_accuracy(cm)
        return f1(cm)
    except EvaluationError as e:
        logger.debug(f"Metric undefined on {data.n} rows: {e}")
        return None


def _reported(value: Optional[Fraction], obj: ObjectiveKind) -> Optional[float]:
    if value is None:
        return None
    return float(-value if obj.kind == Kind.COST_SENSITIVE else value)


def atomic_write(path: str, text: str) -> None:
    """Write text to a temporary file, then rename it over path"""
    tmp_path = f"{path}.tmp"
    with open(tmp_path, "w", encoding="utf-8") as handle:
        handle.write(text)
    os.replace(tmp_path, path)


class BenchmarkRunner:
    """Runs an ExperimentConfig and writes its result files"""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.obj = config.objective_kind()
        self.records: List[RunRecord] = []
        self.selected: List[Dict] = []
        self.solver = BranchAndBoundSolver(workers=config.workers, progress_every=get_settings().progress_every)
        for sub in ("splits", "maps", "models"):
            os.makedirs(os.path.join(config.output_dir, sub), exist_ok=True)

    def _path(self, *parts: str) -> str:
        return os.path.join(self.config.output_dir, *parts)

    def _prepare(self, path: str, seed: int) -> Tuple[str, BinaryDataset, BinaryDataset, BinaryDataset, int]:
        cfg = self.config
        raw = load_csv(path, cfg.label_column)
        # one class order per dataset so every fold scores the same positive class
        _, classes = encode_labels(raw.labels, cfg.positive_label)
        name = os.path.splitext(os.path.basename(path))[0]
        if cfg.no_split:
            everything = tuple(range(raw.n_rows))
            split = DatasetSplit(train=everything, validation=(), test=(), seed=seed)
            parts = (everything, everything, everything)
        else:
            split = split_indices(raw.n_rows, cfg.fractions, seed)
            parts = (split.train, split.validation, split.test)
        write_split_manifest(split, self._path("splits", f"{name}_seed{seed}.split"))
        train_raw = raw.take(parts[0])
        train, bmap = binarize_dataset(train_raw, classes=classes)
        bmap.save(self._path("maps", f"{name}_seed{seed}.map"))
        validation = apply_map(bmap, raw.take(parts[1]))
        test = apply_map(bmap, raw.take(parts[2]))
        return name, train, validation, test, raw.n_rows

    def _budget(self, n_rows: int) -> float:
        if self.config.budget_s is not None:
            return self.config.budget_s
        return get_settings().budget_for_rows(n_rows)

    def run(self) -> List[RunRecord]:
        """
        Execute every dataset x seed x grid point

        Partial results are flushed when the run is interrupted.
        """
        cfg = self.config
        grid = cfg.grid()
        total = len(cfg.datasets) * len(cfg.seeds) * len(grid)
        logger.info(f"Benchmark: {len(cfg.datasets)} dataset(s), {len(cfg.seeds)} seed(s), {len(grid)} grid point(s)")
        try:
            with tqdm(total=total, desc="benchmark", unit="run") as progress:
                for path in cfg.datasets:
                    for seed in cfg.seeds:
                        self._run_seed(path, seed, grid, progress)
        except KeyboardInterrupt:
            logger.warning(f"Interrupted after {len(self.records)} run(s); writing partial results")
            self.write_results()
            raise
        except Exception as e:
            logger.error(f"Benchmark failed: {e}")
            self.write_results()
            raise
        self.write_results()
        return self.records

    def _run_seed(self, path: str, seed: int, grid, progress) -> None:
        cfg = self.config
        name, train, validation, test, n_rows = self._prepare(path, seed)
        budget = self._budget(n_rows)
        best: Optional[Tuple[Fraction, RunRecord]] = None
        for depth, alpha, f_max in grid:
            progress.update(1)
            if f_max > train.n_features:
                logger.warning(f"{name}: skipping F_max={f_max} > {train.n_features} binary features")
                continue
            hp = HyperParams(depth=depth, f_max=f_max, s_min=cfg.s_min, alpha=alpha, costs=cfg.costs)
            result = self.solver.solve(train, hp, self.obj, budget)
            model_path = self._path("models", f"{name}_s{seed}_d{depth}_a{alpha:g}_f{f_max}.model")
            save_tree(result.tree, model_path)
            val_metric = selection_metric(result.tree, validation, self.obj)
            record = RunRecord(
                dataset=name,
                n=n_rows,
                n_features=train.n_features,
                n_classes=train.n_classes,
                seed=seed,
                depth=depth,
                alpha=alpha,
                f_max=f_max,
                s_min=cfg.s_min,
                objective=str(self.obj),
                train_metric=_reported(selection_metric(result.tree, train, self.obj), self.obj),
                validation_metric=_reported(val_metric, self.obj),
                test_metric=_reported(selection_metric(result.tree, test, self.obj), self.obj),
                objective_value=str(result.objective),
                gap=float(result.gap),
                status=result.status.value,
                wall_time_s=round(result.stats.elapsed_s, 3),
                model_path=model_path,
            )
            self.records.append(record)
            # strict improvement keeps the earliest grid point on ties
            if best is None or (val_metric is not None and (best[0] is None or val_metric > best[0])):
                best = (val_metric, record)
        if best is not None:
            self.selected.append(best[1].model_dump())

    def summaries(self) -> Tuple[pd.DataFrame, pd.DataFrame]:
        """Overall and per-depth summaries (means over seeds of the validation-selected runs)"""
        columns = ["dataset", "n", "n_features", "n_classes", "objective", "seeds",
                   "train_metric", "test_metric", "depth"]
        if not self.records or not self.selected:
            return pd.DataFrame(columns=columns), pd.DataFrame(columns=columns)

        selected = pd.DataFrame(self.selected)
        overall = (
            selected.groupby(["dataset", "n", "n_classes", "objective"], sort=True)
            .agg(n_features=("n_features", "max"), seeds=("seed", "count"),
                 train_metric=("train_metric", "mean"), test_metric=("test_metric", "mean"),
                 depth=("depth", "mean"))
            .reset_index()[columns]
        )

        runs = pd.DataFrame([r.model_dump() for r in self.records])
        runs["_order"] = range(len(runs))
        runs["_val"] = runs["validation_metric"].fillna(float("-inf"))
        if self.obj.kind == Kind.COST_SENSITIVE:
            runs["_val"] = -runs["validation_metric"].fillna(float("inf"))
        per_depth = (
            runs.sort_values(["_val", "_order"], ascending=[False, True])
            .groupby(["dataset", "seed", "depth"], sort=True)
            .head(1)
            .groupby(["dataset", "n", "n_classes", "objective", "depth"], sort=True)
            .agg(n_features=("n_features", "max"), seeds=("seed", "count"),
                 train_metric=("train_metric", "mean"), test_metric=("test_metric", "mean"))
            .reset_index()[columns]
        )
        return overall, per_depth

    def write_results(self) -> None:
        lines = "".join(record.to_json_line() + "\n" for record in self.records)
        atomic_write(self._path("runs.jsonl"), lines)
        overall, per_depth = self.summaries()
        atomic_write(self._path("summary.csv"), overall.to_csv(index=False, float_format="%.6f"))
        atomic_write(self._path("summary_by_depth.csv"), per_depth.to_csv(index=False, float_format="%.6f"))
        logger.info(f"Benchmark results written to {self.config.output_dir} ({len(self.records)} run(s))")


def run_benchmark(config: ExperimentConfig) -> Tuple[List[RunRecord], pd.DataFrame, pd.DataFrame]:
    """Run a benchmark and return its records and summaries"""
    runner = BenchmarkRunner(config)
    records = runner.run()
    overall, per_depth = runner.summaries()
    return records, overall, per_depth
