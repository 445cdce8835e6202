"""
Dataset loading, validation and splitting

Raw tables come from CSV files via pandas; binary tables are the numeric
form every formulation and the search operate on.
"""
import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from loguru import logger

from src.ruletree.exceptions import DatasetError

CONTINUOUS = "continuous"
CATEGORICAL = "categorical"
COLUMN_KINDS = (CONTINUOUS, CATEGORICAL)


@dataclass(frozen=True)
class RawDataset:
    """Pre-binarization table: named feature columns plus a label column"""

    columns: Dict[str, Tuple]
    kinds: Dict[str, str]
    labels: Tuple[str, ...]
    label_column: str = "class"
    strict: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        n_rows = len(self.labels)
        if n_rows == 0:
            raise DatasetError("Dataset has no rows")
        for name, values in self.columns.items():
            if len(values) != n_rows:
                raise DatasetError(f"Column '{name}' has {len(values)} entries, expected {n_rows}")
            if self.kinds.get(name) not in COLUMN_KINDS:
                raise DatasetError(f"Column '{name}' has unknown kind {self.kinds.get(name)!r}")
        if self.strict and len(set(self.labels)) < 2:
            raise DatasetError("Label column has fewer than two classes")

    @property
    def n_rows(self) -> int:
        return len(self.labels)

    @property
    def feature_names(self) -> List[str]:
        return list(self.columns)

    def take(self, indices: Sequence[int]) -> "RawDataset":
        """Row subset; the class check is skipped because a fold may hold one class"""
        idx = list(indices)
        return RawDataset(
            columns={k: tuple(v[i] for i in idx) for k, v in self.columns.items()},
            kinds=dict(self.kinds),
            labels=tuple(self.labels[i] for i in idx),
            label_column=self.label_column,
            strict=False,
        )


@dataclass(frozen=True)
class BinaryDataset:
    """
    Binary feature matrix with dense integer labels

    x is an (n, |F|) uint8 array with entries in {0, 1}; y holds labels in
    0..n_classes-1. class_names[k] is the raw label mapped to k.
    """

    x: np.ndarray
    y: np.ndarray
    n_classes: int
    feature_names: Tuple[str, ...] = ()
    class_names: Tuple[str, ...] = ()
    strict: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        x = np.asarray(self.x)
        y = np.asarray(self.y)
        if x.ndim != 2:
            raise DatasetError(f"Feature matrix must be 2-dimensional, got shape {x.shape}")
        if y.ndim != 1 or len(y) != x.shape[0]:
            raise DatasetError(f"Label vector length {len(y)} does not match {x.shape[0]} rows")
        if x.size and not np.isin(x, (0, 1)).all():
            raise DatasetError("Feature matrix contains values other than 0 and 1")
        if len(y) and (y.min() < 0 or y.max() >= self.n_classes):
            raise DatasetError(f"Labels must lie in 0..{self.n_classes - 1}")
        if self.strict and len(np.unique(y)) < 2:
            raise DatasetError("Dataset has fewer than two classes")
        x = x.astype(np.uint8, copy=True)
        y = y.astype(np.int64, copy=True)
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if not self.feature_names:
            object.__setattr__(self, "feature_names", tuple(f"f{j + 1}" for j in range(x.shape[1])))
        elif len(self.feature_names) != x.shape[1]:
            raise DatasetError("feature_names length does not match the number of columns")
        if not self.class_names:
            object.__setattr__(self, "class_names", tuple(str(k) for k in range(self.n_classes)))

    @property
    def n(self) -> int:
        return int(self.x.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.x.shape[1])

    @property
    def class_counts(self) -> Tuple[int, ...]:
        counts = np.bincount(self.y, minlength=self.n_classes)
        return tuple(int(c) for c in counts)

    @property
    def n_pos(self) -> int:
        """n+ (label 1) for binary problems"""
        return self.class_counts[1]

    @property
    def n_neg(self) -> int:
        """n- (label 0) for binary problems"""
        return self.class_counts[0]

    def subset(self, indices: Sequence[int]) -> "BinaryDataset":
        idx = np.asarray(list(indices), dtype=np.int64)
        return BinaryDataset(
            x=self.x[idx],
            y=self.y[idx],
            n_classes=self.n_classes,
            feature_names=self.feature_names,
            class_names=self.class_names,
            strict=False,
        )

    def to_frame(self, label_column: str = "class") -> pd.DataFrame:
        frame = pd.DataFrame(self.x, columns=list(self.feature_names))
        frame[label_column] = [self.class_names[k] for k in self.y]
        return frame


@dataclass(frozen=True)
class DatasetSplit:
    """Train/validation/test partition of row indices"""

    train: Tuple[int, ...]
    validation: Tuple[int, ...]
    test: Tuple[int, ...]
    seed: int

    def __post_init__(self):
        parts = (set(self.train), set(self.validation), set(self.test))
        if sum(len(p) for p in parts) != len(parts[0] | parts[1] | parts[2]):
            raise DatasetError("Split index sets overlap")
        if any(i < 0 for p in parts for i in p):
            raise DatasetError("Split indices must be non-negative")

    @property
    def n(self) -> int:
        return len(self.train) + len(self.validation) + len(self.test)

    def validate(self, n_rows: int) -> None:
        """Check that the split covers exactly the rows 0..n_rows-1"""
        covered = set(self.train) | set(self.validation) | set(self.test)
        outside = sorted(i for i in covered if i >= n_rows)
        if outside:
            raise DatasetError(f"Split refers to rows {outside[:5]} beyond the {n_rows} rows of the data")
        if len(covered) != n_rows:
            raise DatasetError(f"Split covers {len(covered)} of {n_rows} rows")


def _reject_bad_line(fields: List[str]):
    raise DatasetError(f"Ragged row with {len(fields)} fields: {','.join(fields)}")


def _parse_float(value: str) -> Optional[float]:
    try:
        parsed = float(value)
    except ValueError:
        return None
    return parsed if math.isfinite(parsed) else None


def load_csv(
    path: str,
    label_column: str,
    schema: Optional[Mapping[str, str]] = None,
    strict: bool = True,
) -> RawDataset:
    """
    Load a labeled CSV file into a RawDataset

    Args:
        path: Comma-separated UTF-8 file with a header row
        label_column: Name of the label column
        schema: Optional column -> kind overrides ("continuous" / "categorical")
        strict: Require at least two classes (off for prediction inputs)

    Returns:
        RawDataset with inferred column kinds
    """
    if not os.path.exists(path):
        raise DatasetError(f"Data file not found: {path}")

    logger.info(f"Loading CSV from: {path}")
    try:
        frame = pd.read_csv(
            path,
            dtype=str,
            keep_default_na=False,
            engine="python",
            on_bad_lines=_reject_bad_line,
            encoding="utf-8",
        )
    except DatasetError:
        raise
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DatasetError(f"Cannot parse {path}: {e}") from e

    if frame.shape[1] == 0:
        raise DatasetError(f"No header row in {path}")
    if label_column not in frame.columns:
        raise DatasetError(f"Label column '{label_column}' not found in {path}")
    if frame.isna().any().any():
        row = int(np.where(frame.isna().any(axis=1))[0][0]) + 1
        raise DatasetError(f"Ragged row {row}: fewer fields than the header")

    schema = dict(schema or {})
    unknown = sorted(set(schema) - set(frame.columns))
    if unknown:
        raise DatasetError(f"Unknown column(s) in schema: {', '.join(unknown)}")

    labels = tuple(v.strip() for v in frame[label_column])
    if all(not v for v in labels):
        raise DatasetError(f"Label column '{label_column}' is empty")

    columns: Dict[str, Tuple] = {}
    kinds: Dict[str, str] = {}
    for name in frame.columns:
        if name == label_column:
            continue
        cells = [v.strip() for v in frame[name]]
        for row, cell in enumerate(cells, start=1):
            if cell == "":
                raise DatasetError(f"Missing value at row {row}, column '{name}'")
        kind = schema.get(name)
        if kind is not None and kind not in COLUMN_KINDS:
            raise DatasetError(f"Unknown kind {kind!r} for column '{name}'")
        parsed = [_parse_float(c) for c in cells]
        if kind is None:
            kind = CONTINUOUS if all(p is not None for p in parsed) else CATEGORICAL
        if kind == CONTINUOUS:
            for row, (cell, value) in enumerate(zip(cells, parsed), start=1):
                if value is None:
                    raise DatasetError(f"Non-numeric value {cell!r} at row {row}, column '{name}'")
            columns[name] = tuple(parsed)
        else:
            columns[name] = tuple(cells)
        kinds[name] = kind

    for row, label in enumerate(labels, start=1):
        if not label:
            raise DatasetError(f"Missing label at row {row}")

    raw = RawDataset(columns=columns, kinds=kinds, labels=labels, label_column=label_column, strict=strict)
    logger.info(f"Loaded {raw.n_rows} rows, {len(columns)} feature columns from {os.path.basename(path)}")
    return raw


def write_csv(raw: RawDataset, path: str) -> None:
    """Write a RawDataset as CSV (features in order, label column last)"""
    frame = pd.DataFrame({name: list(values) for name, values in raw.columns.items()})
    frame[raw.label_column] = list(raw.labels)
    frame.to_csv(path, index=False)
    logger.info(f"Wrote {raw.n_rows} rows to {path}")


def encode_labels(
    labels: Sequence[str],
    positive_label: Optional[str] = None,
    classes: Optional[Sequence[str]] = None,
) -> Tuple[np.ndarray, Tuple[str, ...]]:
    """
    Map raw labels to dense ids 0..K-1 in first-appearance order

    Args:
        labels: Raw class identifiers
        positive_label: For two-class data, the raw label that must map to 1
        classes: Fixed class order (e.g. taken from the full dataset before splitting);
            labels outside it are rejected

    Returns:
        (dense label array, class names indexed by dense id)
    """
    order: List[str] = list(classes) if classes is not None else []
    for label in labels:
        if label not in order:
            if classes is not None:
                raise DatasetError(f"Label {label!r} is not one of the known classes")
            order.append(label)
    if positive_label is not None:
        if positive_label not in order:
            raise DatasetError(f"Positive label {positive_label!r} does not occur in the data")
        if len(order) != 2:
            raise DatasetError("A positive label can only be chosen for two-class data")
        order = [l for l in order if l != positive_label] + [positive_label]
    mapping = {label: k for k, label in enumerate(order)}
    return np.array([mapping[l] for l in labels], dtype=np.int64), tuple(order)


def binary_dataset_from_raw(raw: RawDataset, positive_label: Optional[str] = None) -> BinaryDataset:
    """
    Interpret a RawDataset whose feature columns are all 0/1 as a BinaryDataset

    Args:
        raw: Loaded table
        positive_label: Optional raw label to map to class 1

    Returns:
        BinaryDataset with the raw column names
    """
    matrix = []
    for name, values in raw.columns.items():
        if raw.kinds[name] != CONTINUOUS or not set(values) <= {0.0, 1.0}:
            raise DatasetError(f"Column '{name}' is not binary; run the binarize command first")
        matrix.append(np.asarray(values, dtype=np.uint8))
    if not matrix:
        raise DatasetError("Dataset has no feature columns")
    y, class_names = encode_labels(raw.labels, positive_label)
    return BinaryDataset(
        x=np.column_stack(matrix),
        y=y,
        n_classes=len(class_names),
        feature_names=tuple(raw.columns),
        class_names=class_names,
    )


def load_binary_csv(path: str, label_column: str, positive_label: Optional[str] = None) -> BinaryDataset:
    """Load a CSV whose feature columns are binary"""
    return binary_dataset_from_raw(load_csv(path, label_column), positive_label=positive_label)


def split_dataset(d: BinaryDataset, fractions: Sequence[float], seed: int) -> DatasetSplit:
    """Partition the rows of a binary dataset, see split_indices"""
    return split_indices(d.n, fractions, seed)


def split_indices(n: int, fractions: Sequence[float], seed: int) -> DatasetSplit:
    """
    Randomly partition row indices 0..n-1 into train/validation/test

    Validation and test sizes are floor(f * n); train receives the remainder.

    Args:
        n: Number of rows
        fractions: (train, validation, test) fractions summing to 1
        seed: Seed for the permutation

    Returns:
        DatasetSplit with sorted index tuples
    """
    if len(fractions) != 3:
        raise DatasetError("Exactly three fractions are required")
    f_train, f_val, f_test = (float(f) for f in fractions)
    if min(f_train, f_val, f_test) <= 0:
        raise DatasetError(f"Fractions must be positive, got {tuple(fractions)}")
    if abs(f_train + f_val + f_test - 1.0) > 1e-9:
        raise DatasetError(f"Fractions must sum to 1, got {f_train + f_val + f_test}")

    n_val = math.floor(f_val * n)
    n_test = math.floor(f_test * n)
    n_train = n - n_val - n_test
    if min(n_train, n_val, n_test) <= 0:
        raise DatasetError(f"Split of {n} rows leaves an empty partition ({n_train}, {n_val}, {n_test})")

    perm = np.random.default_rng(seed).permutation(n)
    validation = tuple(sorted(int(i) for i in perm[:n_val]))
    test = tuple(sorted(int(i) for i in perm[n_val:n_val + n_test]))
    train = tuple(sorted(int(i) for i in perm[n_val + n_test:]))
    logger.debug(f"Split {n} rows with seed {seed}: train={n_train}, validation={n_val}, test={n_test}")
    return DatasetSplit(train=train, validation=validation, test=test, seed=seed)


def write_split_manifest(split: DatasetSplit, path: str) -> None:
    """Write the three index lists (train, validation, test) one per line"""
    lines = [
        f"# split seed={split.seed}",
        " ".join(str(i) for i in split.train),
        " ".join(str(i) for i in split.validation),
        " ".join(str(i) for i in split.test),
    ]
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\n".join(lines) + "\n")


def read_split_manifest(path: str, n_rows: Optional[int] = None) -> DatasetSplit:
    """
    Read a manifest written by write_split_manifest

    Args:
        path: Manifest file
        n_rows: Row count of the dataset it belongs to; when given the split must cover it exactly
    """
    if not os.path.exists(path):
        raise DatasetError(f"Split manifest not found: {path}")
    with open(path, encoding="utf-8") as handle:
        lines = [line.rstrip("\n") for line in handle]
    seed = 0
    if lines and lines[0].startswith("#"):
        header = lines.pop(0)
        if "seed=" in header:
            seed = int(header.split("seed=")[1].split()[0])
    if len(lines) < 3:
        raise DatasetError(f"Split manifest {path} must hold three index lines")
    try:
        parts = [tuple(int(tok) for tok in line.split()) for line in lines[:3]]
    except ValueError as e:
        raise DatasetError(f"Malformed split manifest {path}: {e}") from e
    split = DatasetSplit(train=parts[0], validation=parts[1], test=parts[2], seed=seed)
    if n_rows is not None:
        split.validate(n_rows)
    return split
