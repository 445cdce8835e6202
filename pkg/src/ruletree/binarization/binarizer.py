"""
Binarization of raw tables: MDLP intervals and one-hot categories
"""
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from loguru import logger

from src.ruletree.binarization.mdlp import interval_index, mdlp_cuts
from src.ruletree.data.dataset import CONTINUOUS, BinaryDataset, RawDataset, encode_labels
from src.ruletree.exceptions import BinarizationError

MAP_HEADER = "# ruletree binarization map v1"

BINARY = "binary"
INTERVAL = "interval"
CATEGORY = "category"
DROPPED = "dropped"


def one_hot(values: Sequence) -> Tuple[List, np.ndarray]:
    """
    One-hot encode category ids

    Args:
        values: Non-empty sequence of hashable category ids

    Returns:
        (categories in first-appearance order, n x len(categories) uint8 matrix)
    """
    values = list(values)
    if not values:
        raise BinarizationError("one_hot needs a non-empty sequence")
    categories: List = []
    index: Dict = {}
    for v in values:
        if v not in index:
            index[v] = len(categories)
            categories.append(v)
    matrix = np.zeros((len(values), len(categories)), dtype=np.uint8)
    matrix[np.arange(len(values)), [index[v] for v in values]] = 1
    return categories, matrix


def _format_cut(value: float) -> str:
    return repr(float(value))


@dataclass(frozen=True)
class FeatureEncoding:
    """How one original feature is turned into binary columns"""

    name: str
    kind: str
    cuts: Tuple[float, ...] = ()
    categories: Tuple[str, ...] = ()
    reason: str = ""

    @property
    def columns(self) -> Tuple[str, ...]:
        if self.kind == BINARY:
            return (self.name,)
        if self.kind == CATEGORY:
            return tuple(f"{self.name}={c}" for c in self.categories)
        if self.kind == INTERVAL:
            cuts = [_format_cut(c) for c in self.cuts]
            names = [f"{self.name}<={cuts[0]}"]
            names += [f"{lo}<{self.name}<={hi}" for lo, hi in zip(cuts[:-1], cuts[1:])]
            names.append(f"{self.name}>{cuts[-1]}")
            return tuple(names)
        return ()

    def encode(self, values: Sequence) -> np.ndarray:
        """Binary columns for the given raw values"""
        n = len(values)
        if self.kind == BINARY:
            return np.asarray(values, dtype=float).astype(np.uint8).reshape(n, 1)
        if self.kind == INTERVAL:
            matrix = np.zeros((n, len(self.cuts) + 1), dtype=np.uint8)
            matrix[np.arange(n), interval_index(self.cuts, values)] = 1
            return matrix
        if self.kind == CATEGORY:
            index = {c: j for j, c in enumerate(self.categories)}
            matrix = np.zeros((n, len(self.categories)), dtype=np.uint8)
            unseen = 0
            for i, v in enumerate(values):
                j = index.get(str(v))
                if j is None:
                    unseen += 1
                else:
                    matrix[i, j] = 1
            if unseen:
                logger.warning(f"Feature '{self.name}': {unseen} value(s) with unseen categories encoded as all-zero")
            return matrix
        return np.zeros((n, 0), dtype=np.uint8)


@dataclass(frozen=True)
class BinarizationMap:
    """Per-feature encodings plus the label mapping fitted on training rows"""

    features: Tuple[FeatureEncoding, ...]
    label_column: str
    class_names: Tuple[str, ...]

    @property
    def column_names(self) -> Tuple[str, ...]:
        names: List[str] = []
        for encoding in self.features:
            names.extend(encoding.columns)
        return tuple(names)

    @property
    def dropped(self) -> Tuple[str, ...]:
        return tuple(e.name for e in self.features if e.kind == DROPPED)

    def save(self, path: str) -> None:
        """Write the map as tab-separated text"""
        lines = [MAP_HEADER, "\t".join(["label", self.label_column, *self.class_names])]
        for e in self.features:
            if e.kind == INTERVAL:
                payload = [_format_cut(c) for c in e.cuts]
            elif e.kind == CATEGORY:
                payload = list(e.categories)
            elif e.kind == DROPPED:
                payload = [e.reason]
            else:
                payload = []
            lines.append("\t".join([e.kind, e.name, *payload]))
        with open(path, "w", encoding="utf-8") as handle:
            handle.write("\n".join(lines) + "\n")
        logger.info(f"Binarization map written to {path}")

    @classmethod
    def load(cls, path: str) -> "BinarizationMap":
        if not os.path.exists(path):
            raise BinarizationError(f"Binarization map not found: {path}")
        with open(path, encoding="utf-8") as handle:
            lines = [line.rstrip("\n") for line in handle if line.strip()]
        if not lines or lines[0] != MAP_HEADER:
            raise BinarizationError(f"{path} is not a binarization map (missing header)")
        label_fields = lines[1].split("\t") if len(lines) > 1 else []
        if len(label_fields) < 3 or label_fields[0] != "label":
            raise BinarizationError(f"{path}: malformed label line")
        features = []
        for lineno, line in enumerate(lines[2:], start=3):
            fields = line.split("\t")
            if len(fields) < 2:
                raise BinarizationError(f"{path}: malformed line {lineno}: {line!r}")
            kind, name, *payload = fields
            if kind == INTERVAL:
                try:
                    cuts = tuple(float(c) for c in payload)
                except ValueError as e:
                    raise BinarizationError(f"{path}: malformed line {lineno}: {e}") from e
                features.append(FeatureEncoding(name, kind, cuts=cuts))
            elif kind == CATEGORY:
                features.append(FeatureEncoding(name, kind, categories=tuple(payload)))
            elif kind == DROPPED:
                features.append(FeatureEncoding(name, kind, reason=payload[0] if payload else ""))
            elif kind == BINARY:
                features.append(FeatureEncoding(name, kind))
            else:
                raise BinarizationError(f"{path}: unknown encoding kind {kind!r}")
        return cls(features=tuple(features), label_column=label_fields[1], class_names=tuple(label_fields[2:]))


def _fit_feature(name: str, kind: str, values: Tuple, y: np.ndarray) -> FeatureEncoding:
    if kind == CONTINUOUS:
        distinct = set(values)
        if len(distinct) < 2:
            return FeatureEncoding(name, DROPPED, reason="constant")
        if distinct == {0.0, 1.0}:
            return FeatureEncoding(name, BINARY)
        cuts = mdlp_cuts(values, y)
        if not cuts:
            return FeatureEncoding(name, DROPPED, reason="no MDLP cut")
        return FeatureEncoding(name, INTERVAL, cuts=tuple(cuts))
    categories, _ = one_hot([str(v) for v in values])
    if len(categories) < 2:
        return FeatureEncoding(name, DROPPED, reason="single category")
    return FeatureEncoding(name, CATEGORY, categories=tuple(categories))


def apply_map(bmap: BinarizationMap, raw: RawDataset) -> BinaryDataset:
    """
    Encode raw rows with a fitted map (validation/test rows, or the training rows again)

    Args:
        bmap: Fitted BinarizationMap
        raw: Rows with the same columns as the fitted table

    Returns:
        BinaryDataset with the map's column names and class order
    """
    blocks = []
    for encoding in bmap.features:
        if encoding.kind == DROPPED:
            continue
        if encoding.name not in raw.columns:
            raise BinarizationError(f"Column '{encoding.name}' missing from data")
        blocks.append(encoding.encode(raw.columns[encoding.name]))
    class_index = {c: k for k, c in enumerate(bmap.class_names)}
    unknown = sorted(set(raw.labels) - set(class_index))
    if unknown:
        raise BinarizationError(f"Labels not seen during fitting: {', '.join(unknown)}")
    y = np.array([class_index[label] for label in raw.labels], dtype=np.int64)
    return BinaryDataset(
        x=np.hstack(blocks),
        y=y,
        n_classes=len(bmap.class_names),
        feature_names=bmap.column_names,
        class_names=bmap.class_names,
        strict=False,
    )


def binarize_dataset(
    raw: RawDataset,
    label_column: Optional[str] = None,
    positive_label: Optional[str] = None,
    workers: int = 1,
    classes: Optional[Sequence[str]] = None,
) -> Tuple[BinaryDataset, BinarizationMap]:
    """
    Fit the binarization on raw rows and encode them

    Continuous features are cut with MDLP and one-hot encoded by interval,
    categorical features are one-hot encoded, 0/1 features pass through,
    and features without signal are dropped.

    Args:
        raw: Training rows
        label_column: Expected label column name (checked against raw)
        positive_label: Raw label mapped to class 1 for two-class data
        workers: Threads used for per-feature discretization
        classes: Class order shared with other folds of the same dataset

    Returns:
        (BinaryDataset, BinarizationMap)
    """
    if label_column is not None and label_column != raw.label_column:
        raise BinarizationError(f"Label column '{label_column}' does not match data ('{raw.label_column}')")

    y, class_names = encode_labels(raw.labels, positive_label, classes)
    names = list(raw.columns)
    logger.info(f"Binarizing {len(names)} features over {raw.n_rows} rows")

    def fit(name: str) -> FeatureEncoding:
        return _fit_feature(name, raw.kinds[name], raw.columns[name], y)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            encodings = list(pool.map(fit, names))
    else:
        encodings = [fit(name) for name in names]

    for e in encodings:
        if e.kind == DROPPED:
            logger.warning(f"Dropping feature '{e.name}': {e.reason}")

    bmap = BinarizationMap(features=tuple(encodings), label_column=raw.label_column, class_names=class_names)
    if not bmap.column_names:
        raise BinarizationError("All features were dropped: the dataset carries no signal")

    data = apply_map(bmap, raw)
    data = BinaryDataset(
        x=data.x, y=data.y, n_classes=data.n_classes,
        feature_names=data.feature_names, class_names=data.class_names,
        strict=raw.strict,
    )
    logger.info(f"Binarized into {data.n_features} columns ({len(bmap.dropped)} feature(s) dropped)")
    return data, bmap


def write_binary_csv(data: BinaryDataset, path: str, label_column: str = "class") -> None:
    """Write a BinaryDataset as CSV with the label column last"""
    frame: pd.DataFrame = data.to_frame(label_column)
    frame.to_csv(path, index=False)
    logger.info(f"Binarized CSV written to {path} ({data.n} rows, {data.n_features} columns)")
