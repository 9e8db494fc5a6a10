import json

import numpy as np
import pytest

from sheavg.errors import ConfigError
from sheavg.report import Report, Table, exact, fmt, stat, write_report


class TestFormatting:
    def test_floats_use_17_significant_digits(self):
        assert fmt(1.0 / 3.0) == "0.33333333333333331"
        assert float(fmt(np.pi)) == np.pi  # exact round trip

    def test_ints_and_bools(self):
        assert fmt(7) == "7"
        assert fmt(True) == "1"
        assert fmt(np.int64(-3)) == "-3"


class TestTable:
    def test_roundtrip(self):
        t = Table("demo", ["a", "b"])
        t.add(1, 0.1)
        t.add(2, 0.2)
        again = Table.from_csv("demo", t.to_csv())
        assert again.columns == ["a", "b"]
        assert again.rows == [(1, 0.1), (2, 0.2)]

    def test_row_width_enforced(self):
        t = Table("demo", ["a", "b"])
        with pytest.raises(ValueError):
            t.add(1)

    def test_missing_column_named(self):
        t = Table("demo", ["a"])
        t.add(1)
        with pytest.raises(ConfigError, match="missing"):
            t.column("b")


class TestReport:
    def make_report(self):
        t = Table("demo_summary", ["x"])
        t.add(1.5)
        return Report(kind="demo", config={"schema_version": 1, "output": {
                          "directory": "out", "formats": ["json", "csv"]}},
                      config_hash="abc", replica_ranges=[[0, 10]],
                      summary={"a": stat(1.0, 0.1), "b": exact(2.0)},
                      tables={"demo_summary": t}, sample_tables=[],
                      timing={"wall_seconds": 0.0})

    def test_summary_invariant_enforced(self):
        rep = self.make_report()
        rep.summary["bad"] = {"value": 1.0}  # neither SE nor deterministic
        with pytest.raises(ValueError, match="SE"):
            rep.validate()

    def test_write_and_reload(self, tmp_path):
        rep = self.make_report()
        write_report(rep, str(tmp_path))
        doc = json.loads((tmp_path / "report.json").read_text())
        assert doc["kind"] == "demo"
        assert doc["summary"]["b"]["deterministic"] is True
        assert (tmp_path / "demo_summary.csv").read_text() == "x\n1.5\n"
