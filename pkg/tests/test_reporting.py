import numpy as np
import pytest

from src.history.grid import TimeGrid
from src.reporting import (
    RunManifest,
    read_document,
    read_table,
    sha256_file,
    to_plain,
    write_document,
    write_node_stats,
    write_refinement,
    write_table,
)
from src.reporting.tables import format_value
from src.solvers.evolution import time_march
from src.toys import scalar_ode

from .conftest import evolution


def test_format_value():
    assert format_value(None) == ""
    assert format_value(True) == "true"
    assert format_value(np.int64(3)) == "3"
    assert format_value(0.1) == "1.000000000000e-01"
    assert format_value(np.float64(-2.5)) == "-2.500000000000e+00"
    assert format_value("gamma3") == "gamma3"


def test_table_layout(tmp_path):
    path = write_table(tmp_path / "t.csv", "demo", ["a", "b"], [{"a": 1, "b": 0.5}, {"a": 2}])
    lines = path.read_bytes().split(b"\n")
    assert lines[0] == b"# schema: demo/1"
    assert lines[1] == b"a,b"
    assert lines[2] == b"1,5.000000000000e-01"
    assert lines[3] == b"2,"
    assert b"\r" not in path.read_bytes()
    schema, rows = read_table(path)
    assert schema == "demo/1"
    assert rows[0] == {"a": "1", "b": "5.000000000000e-01"}


def test_read_table_requires_schema(tmp_path):
    path = tmp_path / "plain.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_table(path)


def test_node_stats_are_byte_identical_across_runs(tmp_path):
    grid = TimeGrid(1.0, 20)
    first = write_node_stats(tmp_path / "a.csv", time_march(scalar_ode(), evolution(grid)))
    second = write_node_stats(tmp_path / "b.csv", time_march(scalar_ode(), evolution(grid)))
    assert first.read_bytes() == second.read_bytes()
    schema, rows = read_table(first)
    assert schema == "node-stats/1"
    assert len(rows) == grid.N + 1


def test_refinement_table_pads_missing_entries(tmp_path):
    path = write_refinement(tmp_path / "r.csv", [10, 20, 40], [0.4, 0.2], [0.5, 0.25], [2.0])
    _, rows = read_table(path)
    assert [r["N"] for r in rows] == ["10", "20", "40"]
    assert rows[2]["difference_to_finer"] == ""
    assert rows[1]["ratio"] == ""


def test_documents_are_plain_yaml(tmp_path):
    data = {"w": np.array([0.5, 1.0 / 3.0]), "n": np.int32(4), "ok": np.bool_(True), "inf": float("inf")}
    plain = to_plain(data)
    assert plain["w"] == [0.5, float(f"{1.0 / 3.0:.12e}")]
    assert type(plain["n"]) is int
    path = write_document(tmp_path / "doc.yaml", data)
    back = read_document(path)
    assert back["ok"] is True
    assert back["inf"] == float("inf")


def test_manifest_records_and_verifies(tmp_path):
    manifest = RunManifest("simulate", "demo.yaml", {"tol": 1e-8}, seed=3, output_dir=str(tmp_path))
    manifest.write()
    artifact = write_table(tmp_path / "x.csv", "demo", ["a"], [{"a": 1}])
    manifest.record(artifact)
    manifest.write()
    loaded = RunManifest.load(manifest.path)
    assert loaded.artifacts == {"x.csv": sha256_file(artifact)}
    assert loaded.verify() == {"x.csv": True}
    artifact.write_text("tampered\n")
    assert loaded.verify() == {"x.csv": False}
