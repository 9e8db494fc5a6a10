"""Experiment reports: structured JSON plus flat columnar CSV tables.

Tables are named ``<experiment>_<quantity>.csv`` with a header row; floats
are serialized with 17 significant digits so values round-trip exactly and
repeated runs produce byte-identical files.  The JSON report mirrors the
tables with summary statistics; every statistic carries either a standard
error or a ``deterministic`` flag.  Timing metadata lives in its own block,
excluded from reproducibility comparisons.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import ConfigError

REPORT_NAME = "report.json"


def fmt(value) -> str:
    """Canonical cell format: 17 significant digits for floats."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


@dataclass
class Table:
    name: str
    columns: list
    rows: list = field(default_factory=list)

    def add(self, *row) -> None:
        if len(row) != len(self.columns):
            raise ValueError(f"table {self.name}: row width {len(row)} != "
                             f"{len(self.columns)} columns")
        self.rows.append(tuple(row))

    def to_csv(self) -> str:
        lines = [",".join(self.columns)]
        lines.extend(",".join(fmt(c) for c in row) for row in self.rows)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, name: str, text: str) -> "Table":
        lines = [ln for ln in text.splitlines() if ln]
        if not lines:
            raise ConfigError(f"table {name} is empty")
        columns = lines[0].split(",")
        rows = []
        for ln in lines[1:]:
            cells = ln.split(",")
            parsed = []
            for c in cells:
                try:
                    parsed.append(int(c))
                except ValueError:
                    try:
                        parsed.append(float(c))
                    except ValueError:
                        parsed.append(c)
            rows.append(tuple(parsed))
        return cls(name=name, columns=columns, rows=rows)

    def column(self, name: str) -> list:
        try:
            idx = self.columns.index(name)
        except ValueError:
            raise ConfigError(f"table {self.name} has no column {name!r}") from None
        return [row[idx] for row in self.rows]


def stat(value: float, se: float) -> dict:
    """A Monte Carlo statistic with its standard error."""
    return {"value": float(value), "se": float(se)}


def exact(value) -> dict:
    """A deterministic (quadrature or closed-form) statistic."""
    if isinstance(value, (bool, np.bool_)):
        return {"value": bool(value), "deterministic": True}
    return {"value": float(value), "deterministic": True}


def _check_summary(node, path="summary") -> None:
    if isinstance(node, dict):
        if "value" in node:
            if "se" not in node and not node.get("deterministic", False):
                raise ValueError(f"{path} carries neither an SE nor a "
                                 "deterministic flag")
            return
        for key, sub in node.items():
            _check_summary(sub, f"{path}.{key}")
    elif isinstance(node, list):
        for i, sub in enumerate(node):
            _check_summary(sub, f"{path}[{i}]")


@dataclass
class Report:
    kind: str
    config: dict
    config_hash: str
    replica_ranges: list           # list of [lo, hi) pairs
    summary: dict
    tables: dict                   # name -> Table
    sample_tables: list            # table names needed to merge
    timing: dict

    def validate(self) -> None:
        _check_summary(self.summary)
        for name in self.sample_tables:
            if name not in self.tables:
                raise ValueError(f"sample table {name} missing from tables")


def write_report(report: Report, outdir: str) -> list:
    """Write report.json and all CSV tables; returns the written paths."""
    report.validate()
    os.makedirs(outdir, exist_ok=True)
    formats = report.config.get("output", {}).get("formats", ["json", "csv"])
    written = []
    if "csv" in formats:
        for name in sorted(report.tables):
            path = os.path.join(outdir, f"{name}.csv")
            with open(path, "w") as fh:
                fh.write(report.tables[name].to_csv())
            written.append(path)
    if "json" in formats:
        doc = {
            "schema_version": report.config.get("schema_version", 1),
            "kind": report.kind,
            "config_hash": report.config_hash,
            "config": report.config,
            "replica_ranges": report.replica_ranges,
            "summary": report.summary,
            "tables": sorted(f"{n}.csv" for n in report.tables),
            "sample_tables": sorted(f"{n}.csv" for n in report.sample_tables),
            "timing": report.timing,
        }
        path = os.path.join(outdir, REPORT_NAME)
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
        written.append(path)
    return written


def load_report(directory: str) -> tuple[dict, dict]:
    """Load report.json and its sample tables for merging."""
    path = os.path.join(directory, REPORT_NAME)
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    tables = {}
    for fname in doc.get("sample_tables", []):
        tpath = os.path.join(directory, fname)
        try:
            with open(tpath) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read sample table {tpath}: {exc}") from exc
        name = fname[:-4] if fname.endswith(".csv") else fname
        tables[name] = Table.from_csv(name, text)
    return doc, tables
