import numpy as np
import pytest

from src.ruletree.data.dataset import (
    CATEGORICAL,
    CONTINUOUS,
    BinaryDataset,
    encode_labels,
    load_binary_csv,
    load_csv,
    read_split_manifest,
    split_indices,
    write_csv,
    write_split_manifest,
)
from src.ruletree.exceptions import DatasetError


def _write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_load_csv_infers_kinds(tmp_path):
    path = _write(tmp_path, "age,colour,class\n31,red,yes\n45.5,blue,no\n22,red,yes\n")
    raw = load_csv(path, "class")
    assert raw.n_rows == 3
    assert raw.kinds == {"age": CONTINUOUS, "colour": CATEGORICAL}
    assert raw.columns["age"] == (31.0, 45.5, 22.0)
    assert raw.labels == ("yes", "no", "yes")


def test_load_csv_schema_overrides_kind(tmp_path):
    path = _write(tmp_path, "zip,class\n1000,a\n2000,b\n")
    raw = load_csv(path, "class", schema={"zip": CATEGORICAL})
    assert raw.kinds["zip"] == CATEGORICAL
    assert raw.columns["zip"] == ("1000", "2000")


@pytest.mark.parametrize(
    "text, message",
    [
        ("a,class\n1,x\n,y\n", "Missing value"),
        ("a,class\n1,x\n2\n", "Ragged"),
        ("a,class\n1,x\n2,y,3\n", "Ragged"),
        ("a,class\n1,x\n2,x\n", "fewer than two classes"),
    ],
)
def test_load_csv_rejects_bad_files(tmp_path, text, message):
    path = _write(tmp_path, text)
    with pytest.raises(DatasetError, match=message):
        load_csv(path, "class")


def test_load_csv_missing_label_column(tmp_path):
    path = _write(tmp_path, "a,b\n1,2\n")
    with pytest.raises(DatasetError, match="Label column"):
        load_csv(path, "class")


def test_load_csv_single_class_allowed_when_not_strict(tmp_path):
    path = _write(tmp_path, "a,class\n1,x\n0,x\n")
    raw = load_csv(path, "class", strict=False)
    assert raw.labels == ("x", "x")


def test_load_csv_missing_file():
    with pytest.raises(DatasetError, match="not found"):
        load_csv("/nonexistent/file.csv", "class")


def test_write_csv_round_trip(tmp_path):
    path = _write(tmp_path, "age,colour,class\n31.0,red,yes\n45.5,blue,no\n")
    raw = load_csv(path, "class")
    out = str(tmp_path / "copy.csv")
    write_csv(raw, out)
    again = load_csv(out, "class")
    assert again.columns == raw.columns
    assert again.labels == raw.labels


def test_encode_labels_first_appearance_and_positive():
    y, names = encode_labels(["b", "a", "b"])
    assert names == ("b", "a")
    assert y.tolist() == [0, 1, 0]
    y, names = encode_labels(["b", "a", "b"], positive_label="b")
    assert names == ("a", "b")
    assert y.tolist() == [1, 0, 1]


def test_encode_labels_positive_requires_two_classes():
    with pytest.raises(DatasetError):
        encode_labels(["a", "b", "c"], positive_label="a")
    with pytest.raises(DatasetError):
        encode_labels(["a", "b"], positive_label="z")


def test_binary_dataset_validation():
    with pytest.raises(DatasetError, match="other than 0 and 1"):
        BinaryDataset(x=np.array([[0, 2], [1, 0]]), y=np.array([0, 1]), n_classes=2)
    with pytest.raises(DatasetError, match="does not match"):
        BinaryDataset(x=np.zeros((2, 2)), y=np.array([0, 1, 1]), n_classes=2)
    with pytest.raises(DatasetError, match="fewer than two classes"):
        BinaryDataset(x=np.zeros((2, 2)), y=np.array([1, 1]), n_classes=2)


def test_binary_dataset_is_read_only(example1):
    with pytest.raises(ValueError):
        example1.x[0, 0] = 1
    assert example1.class_counts == (4, 6)
    assert example1.n_pos == 6 and example1.n_neg == 4


def test_load_binary_csv(example1_csv, example1):
    data = load_binary_csv(example1_csv, "class")
    assert np.array_equal(data.x, example1.x)
    assert np.array_equal(data.y, example1.y)
    assert data.feature_names == ("f1", "f2", "f3", "f4", "f5")


def test_load_binary_csv_rejects_non_binary(tmp_path):
    path = _write(tmp_path, "a,class\n0,x\n3,y\n")
    with pytest.raises(DatasetError, match="not binary"):
        load_binary_csv(path, "class")


@pytest.mark.parametrize("seed", [0, 1, 7])
def test_split_indices_partition(seed):
    split = split_indices(100, (0.5, 0.25, 0.25), seed)
    assert (len(split.train), len(split.validation), len(split.test)) == (50, 25, 25)
    everything = set(split.train) | set(split.validation) | set(split.test)
    assert everything == set(range(100))
    assert split_indices(100, (0.5, 0.25, 0.25), seed) == split


def test_split_indices_floor_rule():
    split = split_indices(10, (0.5, 0.25, 0.25), 3)
    assert (len(split.train), len(split.validation), len(split.test)) == (6, 2, 2)


def test_split_indices_rejects_bad_fractions():
    with pytest.raises(DatasetError):
        split_indices(10, (0.5, 0.5, 0.5), 0)
    with pytest.raises(DatasetError):
        split_indices(3, (0.8, 0.1, 0.1), 0)


def test_split_manifest_round_trip(tmp_path):
    split = split_indices(20, (0.5, 0.25, 0.25), 11)
    path = str(tmp_path / "split.txt")
    write_split_manifest(split, path)
    assert read_split_manifest(path) == split


def test_encode_labels_with_fixed_classes():
    y, names = encode_labels(["b", "a", "b"], classes=("a", "b"))
    assert names == ("a", "b")
    assert y.tolist() == [1, 0, 1]
    y, names = encode_labels(["a", "a"], classes=("a", "b"))
    assert names == ("a", "b") and y.tolist() == [0, 0]
    with pytest.raises(DatasetError, match="not one of the known classes"):
        encode_labels(["a", "c"], classes=("a", "b"))


@pytest.mark.parametrize(
    "lines, message",
    [
        (["0 1 2", "3", "4"], "covers 5 of 6 rows"),
        (["0 1 2 3", "4", "9"], "beyond"),
        (["0 1 2", "3 -4", "5"], "non-negative"),
    ],
)
def test_split_manifest_checked_against_row_count(tmp_path, lines, message):
    path = tmp_path / "split.txt"
    path.write_text("# split seed=0\n" + "\n".join(lines) + "\n", encoding="utf-8")
    with pytest.raises(DatasetError, match=message):
        read_split_manifest(str(path), n_rows=6)


def test_split_manifest_without_row_count_is_not_checked(tmp_path):
    path = tmp_path / "split.txt"
    path.write_text("0 1\n2\n7\n", encoding="utf-8")
    assert read_split_manifest(str(path)).test == (7,)
