"""Experiment configuration: parsing, defaults, validation, content hash.

Configurations are JSON documents with four sections (model, grid,
experiment, output).  Everything is validated before any computation; the
content hash covers the physics sections (not the output section or the
replica range), so batches produced from the same configuration can be
merged safely.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .model import DiffusionField, SigmaFamily
from .solver import Grid

SCHEMA_VERSION = 1

KINDS = ("h1", "covariance", "rate", "fclt", "malliavin", "oracle")
ETA_SOURCES = ("auto", "closed-form", "monte-carlo", "volterra")

# One place for every physical default (documented in the README).
DEFAULTS = {
    "grid": {
        "final_time": 1.0,
        "dt": 1e-3,
        "dx": 0.05,
        "padding": 6.0,
        "output_times": [0.25, 0.5, 0.75, 1.0],
    },
    "experiment": {
        "seed": 20260809,
        "replicas": 2000,
        "radii": [2.0, 4.0, 8.0, 16.0, 32.0],
        "time": 1.0,
        "nproj": 64,
        "pairs": [[0.25, 0.5], [0.5, 0.75], [0.25, 1.0]],
        "moment_order": 4,
        "eta": {"source": "auto", "replicas": 600, "grid_step": 0.05,
                "seed_offset": 1},
        "oracle": {"coupling": 1.0, "tolerance": 1e-8, "steps": 64},
    },
    "output": {"directory": "out", "formats": ["json", "csv"]},
}

_SECTION_DEFAULTS = {
    "grid": DEFAULTS["grid"],
    "experiment": DEFAULTS["experiment"],
    "eta": DEFAULTS["experiment"]["eta"],
    "oracle": DEFAULTS["experiment"]["oracle"],
    "output": DEFAULTS["output"],
}

_SECTION_KEYS = {name: set(vals) | ({"kind"} if name == "experiment" else set())
                 for name, vals in _SECTION_DEFAULTS.items()}


def _merged(section: str, given: dict) -> dict:
    unknown = set(given) - _SECTION_KEYS[section]
    if unknown:
        raise ConfigError(f"unknown {section} keys: {sorted(unknown)}")
    out = copy.deepcopy(_SECTION_DEFAULTS[section])
    for key, val in given.items():
        if isinstance(val, dict) and key in _SECTION_KEYS:
            out[key] = _merged(key, val)
        else:
            out[key] = val
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    """A fully validated configuration with its built model and grid."""

    raw: dict
    family: SigmaFamily
    grid: Grid
    kind: str
    seed: int
    replicas: int
    radii: tuple
    time: float
    pairs: tuple
    nproj: int
    moment_order: float
    eta_source: str
    eta_replicas: int
    eta_grid_step: float
    eta_seed_offset: int
    oracle_coupling: float
    oracle_tolerance: float
    oracle_steps: int
    output_directory: str
    formats: tuple

    @property
    def field(self) -> DiffusionField:
        return self.family.build()

    @property
    def config_hash(self) -> str:
        return config_hash(self.raw)

    def physics_dict(self) -> dict:
        return {k: self.raw[k] for k in ("schema_version", "model", "grid", "experiment")}


def config_hash(raw: dict) -> str:
    """Content hash over the physics sections, stable under key order."""
    payload = {k: raw[k] for k in ("schema_version", "model", "grid", "experiment")}
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigError(msg)


def normalize(data: dict) -> dict:
    """Fill defaults and reject unknown keys; returns the canonical dict."""
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = set(data) - {"schema_version", "model", "grid", "experiment", "output"}
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    out = {"schema_version": data.get("schema_version", SCHEMA_VERSION)}
    _require(out["schema_version"] == SCHEMA_VERSION,
             f"unsupported schema_version {out['schema_version']}")
    _require("model" in data, "configuration needs a model section")
    _require("experiment" in data and "kind" in data["experiment"],
             "configuration needs experiment.kind")
    out["model"] = copy.deepcopy(data["model"])
    out["grid"] = _merged("grid", data.get("grid", {}))
    out["experiment"] = _merged("experiment", data["experiment"])
    out["output"] = _merged("output", data.get("output", {}))
    return out


def build(data: dict) -> ExperimentConfig:
    """Validate a raw configuration dict and build the model and grid."""
    raw = normalize(data)
    family = SigmaFamily.from_dict(raw["model"])
    d, m = family.shape

    exp = raw["experiment"]
    kind = exp["kind"]
    _require(kind in KINDS, f"experiment.kind must be one of {KINDS}, got {kind!r}")
    seed = exp["seed"]
    _require(isinstance(seed, int) and 0 <= seed < (1 << 64),
             "experiment.seed must be a 64-bit unsigned integer")
    replicas = exp["replicas"]
    _require(isinstance(replicas, int) and replicas >= 2,
             "experiment.replicas must be an integer >= 2")
    radii = [float(r) for r in exp["radii"]]
    _require(len(radii) >= 1, "experiment.radii must not be empty")
    _require(all(r > 0 for r in radii), "radii must be positive")
    _require(radii == sorted(radii), "experiment.radii must be sorted ascending")

    g = raw["grid"]
    grid = Grid.build(T=float(g["final_time"]), dt=float(g["dt"]), dx=float(g["dx"]),
                      r_max=max(radii), output_times=[float(t) for t in g["output_times"]],
                      padding=float(g["padding"]))
    _require(len(grid.output_times) >= 1, "grid.output_times must not be empty")
    for R in radii:
        grid.validate_radius(R)

    t = float(exp["time"])
    grid.time_index(t)
    _require(t in grid.output_times or kind in ("h1", "rate", "oracle"),
             f"experiment.time {t} must be listed in grid.output_times")
    pairs = tuple((float(s), float(u)) for s, u in exp["pairs"])
    for s, u in pairs:
        _require(s < u, f"fclt pair ({s}, {u}) must be increasing")
        if kind == "fclt":
            _require(s in grid.output_times and u in grid.output_times,
                     f"fclt pair times ({s}, {u}) must be output times")
    nproj = exp["nproj"]
    _require(isinstance(nproj, int) and nproj >= 2, "experiment.nproj must be >= 2")
    moment_order = exp["moment_order"]
    _require(moment_order > 0, "experiment.moment_order must be positive")

    eta = exp["eta"]
    _require(eta["source"] in ETA_SOURCES,
             f"eta.source must be one of {ETA_SOURCES}")
    source = eta["source"]
    if source == "auto":
        source = _auto_eta_source(family)
    if source == "closed-form":
        _require(family.tag == "constant",
                 "closed-form eta is exact only for the constant family")
    if source == "volterra":
        _require(_is_linear_scalar(family),
                 "volterra eta needs the scalar linear family sigma(u) = b*u")
    _require(isinstance(eta["replicas"], int) and eta["replicas"] >= 2,
             "eta.replicas must be an integer >= 2")
    step = float(eta["grid_step"])
    _require(step > 0, "eta.grid_step must be positive")
    if source == "monte-carlo":
        # estimation times must be realizable on the solver grid
        _require(round(step / grid.dt) >= 1
                 and abs(step - round(step / grid.dt) * grid.dt) < 1e-9,
                 "eta.grid_step must be a positive multiple of dt for "
                 "monte-carlo eta estimation")

    orc = exp["oracle"]
    _require(float(orc["tolerance"]) > 0, "oracle.tolerance must be positive")
    _require(int(orc["steps"]) >= 16, "oracle.steps must be at least 16")

    out = raw["output"]
    _require(set(out["formats"]) <= {"json", "csv"} and out["formats"],
             "output.formats must be a nonempty subset of ['json', 'csv']")

    return ExperimentConfig(
        raw=raw, family=family, grid=grid, kind=kind, seed=seed,
        replicas=replicas, radii=tuple(radii), time=t, pairs=pairs,
        nproj=nproj, moment_order=float(moment_order), eta_source=source,
        eta_replicas=eta["replicas"], eta_grid_step=step,
        eta_seed_offset=int(eta["seed_offset"]),
        oracle_coupling=float(orc["coupling"]),
        oracle_tolerance=float(orc["tolerance"]), oracle_steps=int(orc["steps"]),
        output_directory=str(out["directory"]), formats=tuple(out["formats"]))


def _auto_eta_source(family: SigmaFamily) -> str:
    if family.tag == "constant":
        return "closed-form"
    if _is_linear_scalar(family):
        return "volterra"
    return "monte-carlo"


def _is_linear_scalar(family: SigmaFamily) -> bool:
    if family.tag != "affine" or family.shape != (1, 1):
        return False
    return float(np.max(np.abs(family.params["offsets"]))) == 0.0


def from_file(path: str) -> ExperimentConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return build(data)


def parse_override(text: str) -> tuple[list, object]:
    """Parse a KEY.PATH=VALUE override; values are JSON with string fallback."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} must look like key.path=value")
    path, _, valtext = text.partition("=")
    keys = [k for k in path.strip().split(".") if k]
    if not keys:
        raise ConfigError(f"override {text!r} has an empty key path")
    try:
        value = json.loads(valtext)
    except json.JSONDecodeError:
        value = valtext
    return keys, value


def apply_overrides(data: dict, overrides) -> dict:
    out = copy.deepcopy(data)
    for text in overrides:
        keys, value = parse_override(text)
        node = out
        for k in keys[:-1]:
            node = node.setdefault(k, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override path {'.'.join(keys)} crosses a scalar")
        node[keys[-1]] = value
    return out
