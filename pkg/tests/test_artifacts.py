from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
import pytest

from app.artifacts import ArtifactError, ArtifactWriter, read_csv
from app.bem import read_matrix

HASH = "f" * 64


def test_csv_carries_hash_and_formats_cells(tmp_path: Path) -> None:
    writer = ArtifactWriter(tmp_path / "run", HASH)
    rows = [["a", 3, 0.5, True], ["b", np.int64(4), math.nan, False]]
    path = writer.write_csv("table.csv", ("name", "count", "value", "flag"), rows)
    config_hash, header, read_rows = read_csv(path)
    assert config_hash == HASH
    assert header == ["name", "count", "value", "flag"]
    assert read_rows == [["a", "3", "0.5", "true"], ["b", "4", "nan", "false"]]
    assert writer.written == [path]


def test_json_is_strict_and_hashed(tmp_path: Path) -> None:
    writer = ArtifactWriter(tmp_path, HASH)
    path = writer.write_json(
        "summary.json",
        {"ratio": math.nan, "values": np.array([1.0, 2.0]), "z": 1 + 2j, "where": tmp_path, "n": np.int32(7)},
    )
    document = json.loads(path.read_text(encoding="utf-8"))
    assert document["config_hash"] == HASH
    assert document["ratio"] is None
    assert document["values"] == [1.0, 2.0]
    assert document["z"] == [1.0, 2.0]
    assert document["where"] == str(tmp_path)
    assert document["n"] == 7


def test_matrix_dump(tmp_path: Path) -> None:
    writer = ArtifactWriter(tmp_path, HASH)
    matrix = np.array([[1.0 + 1.0j, 2.0], [0.0, -3.5j]])
    path = writer.write_matrix("coupled_matrix.bin", matrix, "bin")
    assert np.array_equal(read_matrix(path), matrix)
    sidecar = json.loads(path.with_suffix(".bin.json").read_text(encoding="utf-8"))
    assert sidecar["config_hash"] == HASH
    text = writer.write_matrix("coupled_matrix.csv", matrix, "csv").read_text(encoding="utf-8").splitlines()
    assert text[0] == f"# config_hash={HASH}"
    assert text[1] == "row,col,re,im"
    assert len(text) == 2 + matrix.size


def test_unwritable_directory_raises(tmp_path: Path) -> None:
    blocker = tmp_path / "file"
    blocker.write_text("x", encoding="utf-8")
    with pytest.raises(ArtifactError):
        ArtifactWriter(blocker / "sub", HASH)


def test_read_csv_without_hash(tmp_path: Path) -> None:
    path = tmp_path / "plain.csv"
    path.write_text("a,b\n1,2\n", encoding="utf-8")
    assert read_csv(path) == (None, ["a", "b"], [["1", "2"]])
