"""File-format tests: instance CSVs, truth files, manifests, diagnostics."""

from __future__ import annotations

import numpy as np
import pytest

from rootloc import (
    LeafTable,
    parse_element,
    read_instance,
    read_truth,
    write_instance,
    write_truth,
)
from rootloc.generate import GroundTruth, Anomaly
from rootloc.io import (
    DatasetFormatError,
    read_manifest,
    write_manifest,
)

from conftest import small_schema


def table_signature(table: LeafTable) -> dict:
    """Measure values keyed by value strings, independent of id assignment."""
    schema = table.schema
    out = {}
    for r in range(len(table)):
        key = tuple(
            schema.values[i][table.coords[r, i]] for i in range(schema.dimension)
        )
        out[key] = (float(table.actual[r]), float(table.forecast[r]))
    return out


class TestInstanceRoundTrip:
    def test_fundamental(self, worked_example, tmp_path):
        path = tmp_path / "instance.csv"
        write_instance(worked_example, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "DataCenter,DeviceType,real,predict"
        restored = read_instance(path)
        assert table_signature(restored) == table_signature(worked_example)
        assert restored.measure_kind == "fundamental"

    def test_derived(self, tmp_path):
        schema = small_schema((2, 2))
        coords = np.array([[0, 0], [0, 1], [1, 0]], dtype=np.int32)
        table = LeafTable(
            schema,
            coords,
            numerator=(np.array([1.0, 2.0, 3.0]), np.array([2.0, 2.0, 2.0])),
            denominator=(np.array([4.0, 4.0, 6.0]), np.array([4.0, 5.0, 6.0])),
        )
        path = tmp_path / "derived.csv"
        write_instance(table, path)
        header = path.read_text().splitlines()[0]
        assert header.endswith("real_num,predict_num,real_denom,predict_denom")
        restored = read_instance(path)
        assert restored.measure_kind == "derived"
        np.testing.assert_allclose(sorted(restored.actual), sorted(table.actual))
        np.testing.assert_allclose(sorted(restored.forecast), sorted(table.forecast))

    def test_trailing_newline(self, worked_example, tmp_path):
        path = tmp_path / "instance.csv"
        write_instance(worked_example, path)
        assert path.read_bytes().endswith(b"\n")


class TestInstanceDiagnostics:
    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,value\nx,y,1\n")
        with pytest.raises(DatasetFormatError, match="header"):
            read_instance(path)

    def test_non_numeric_with_line_number(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,real,predict\nx,1,2\ny,oops,3\n")
        with pytest.raises(DatasetFormatError, match=r"bad\.csv:3"):
            read_instance(path)

    def test_negative_value_with_line_number(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,real,predict\nx,1,2\ny,-4,3\n")
        with pytest.raises(DatasetFormatError, match=r"bad\.csv:3.*>= 0"):
            read_instance(path)

    def test_duplicate_row_with_line_number(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,real,predict\nx,u,1,2\nx,u,3,4\n")
        with pytest.raises(DatasetFormatError, match=r"bad\.csv:3.*duplicate"):
            read_instance(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,real,predict\n")
        with pytest.raises(DatasetFormatError, match="no data rows"):
            read_instance(path)


class TestTruthFile:
    def test_round_trip(self, two_attr_schema, tmp_path):
        x_star = parse_element("DataCenter=X", two_attr_schema)
        leaf = parse_element("DataCenter=Y&DeviceType=D2", two_attr_schema)
        truth = GroundTruth(
            {
                "00000": (
                    Anomaly((x_star,), 0.5, 0.0, "actual"),
                    Anomaly((leaf,), 0.7, 0.0, "actual"),
                ),
                "00001": tuple(),
            }
        )
        path = tmp_path / "truth.csv"
        write_truth(truth, two_attr_schema, path)
        restored = read_truth(path, two_attr_schema)
        assert restored["00000"] == frozenset({x_star, leaf})
        assert restored["00001"] == frozenset()
        assert path.read_text().endswith("\n")

    def test_bad_header(self, two_attr_schema, tmp_path):
        path = tmp_path / "truth.csv"
        path.write_text("id,elements\n0,DataCenter=X\n")
        with pytest.raises(DatasetFormatError, match="header"):
            read_truth(path, two_attr_schema)

    def test_unknown_value_diagnosed_with_line(self, two_attr_schema, tmp_path):
        path = tmp_path / "truth.csv"
        path.write_text("instance_id,set\n00000,DataCenter=Q\n")
        with pytest.raises(DatasetFormatError, match=r"truth\.csv:2"):
            read_truth(path, two_attr_schema)

    def test_duplicate_instance_rejected(self, two_attr_schema, tmp_path):
        path = tmp_path / "truth.csv"
        path.write_text("instance_id,set\n0,DataCenter=X\n0,DataCenter=Y\n")
        with pytest.raises(DatasetFormatError, match="duplicate"):
            read_truth(path, two_attr_schema)


class TestManifest:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "manifest.txt"
        entries = {"name": "S", "seed": "7", "cardinalities": "10x12x10x8x5"}
        write_manifest(entries, path)
        assert read_manifest(path) == entries
        assert path.read_text().endswith("\n")
