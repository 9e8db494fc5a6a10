"""Experiment drivers: replica-parallel sample generation and analysis.

Every sample-producing experiment is split into two pure stages:

* ``generate``: per-replica samples as arrays, computed in fixed-size chunks
  (optionally across worker processes).  Each replica's rows depend only on
  (config, seed, replica_id), never on the batch composition, so any
  partition of the replica range produces identical rows.
* ``analyze``: statistics, quadratures and tables from the samples.  Merging
  partial reports concatenates their sample rows and reruns this stage, which
  makes a merged report bit-identical to the corresponding single run.
"""

from __future__ import annotations

import math
import time as _time
from concurrent.futures import ProcessPoolExecutor
from typing import Optional, Sequence

import numpy as np

from . import config as config_mod
from .config import ExperimentConfig
from .errors import ConfigError
from .malliavin import run_pairings, stein_bound
from .model import check_h1
from .observables import (EtaCurve, average_weights, covariance_se,
                          estimate_eta, limit_covariance,
                          limit_cross_covariance, prelimit_covariance,
                          prelimit_cross_covariance)
from .oracles import (additive_point_variance, constant_sigma_law,
                      pam_second_moment)
from .report import Report, Table, exact, load_report, stat
from .solver import Grid, noise_steps
from .stats import (gaussian_gap_bound, gaussian_w2, increment_moment,
                    increment_orthogonality, mardia, min_eigen_check,
                    op_norm, rate_fit, sliced_w1)

CHUNK = 256


# ---------------------------------------------------------------------------
# eta resolution

def resolve_eta(cfg: ExperimentConfig) -> EtaCurve:
    """The eta curve for the configured model, per the configured source."""
    T = cfg.grid.T
    if cfg.eta_source == "closed-form":
        times = _eta_times(cfg)
        return EtaCurve.constant(cfg.family.params["values"], times)
    if cfg.eta_source == "volterra":
        lam = float(cfg.family.params["slopes"][0, 0, 0])
        sol = pam_second_moment(lam, T, steps=max(cfg.oracle_steps, 64),
                                tol=min(cfg.oracle_tolerance, 1e-8))
        return sol.eta_curve()
    eta_grid = Grid.build(T=T, dt=cfg.grid.dt, dx=cfg.grid.dx,
                          r_max=6.0 * math.sqrt(2.0 * T),
                          output_times=(), padding=6.0)
    return estimate_eta(cfg.field, eta_grid, _eta_times(cfg),
                        cfg.eta_replicas, cfg.seed + cfg.eta_seed_offset)


def _eta_times(cfg: ExperimentConfig) -> list:
    n = int(round(cfg.grid.T / cfg.eta_grid_step))
    return [k * cfg.eta_grid_step for k in range(n + 1)]


def _eta_table(kind: str, eta: EtaCurve) -> Table:
    table = Table(f"{kind}_eta", ["r", "k", "i", "j", "value", "se"])
    for row in eta.to_rows():
        table.add(*row)
    return table


# ---------------------------------------------------------------------------
# sample generation

def _chunk_ranges(lo: int, hi: int) -> list:
    out = []
    for a in range((lo // CHUNK) * CHUNK, hi, CHUNK):
        c = (max(a, lo), min(a + CHUNK, hi))
        if c[0] < c[1]:
            out.append(c)
    return out


def _collect_averages(raw: dict, lo: int, hi: int) -> np.ndarray:
    """Spatial averages of one replica chunk: (B, n_times, n_radii, d)."""
    cfg = config_mod.build(raw)
    field, grid = cfg.field, cfg.grid
    radii = np.asarray(cfg.radii)
    weights = np.stack([average_weights(grid, R) for R in cfg.radii])
    inv_root = 1.0 / np.sqrt(radii)
    wanted = {grid.time_index(t): k for k, t in enumerate(grid.output_times)}
    last = max(wanted)
    out = np.empty((hi - lo, len(wanted), len(cfg.radii), field.d))
    for n, u, xi in noise_steps(field, grid, cfg.seed, range(lo, hi), last_step=last):
        pos = wanted.get(n)
        if pos is not None:
            out[:, pos] = (np.einsum("rl,bli->bri", weights, u)
                           - 2.0 * radii[None, :, None]) * inv_root[None, :, None]
        if xi is None:
            break
    return out


def _collect_pairings(raw: dict, lo: int, hi: int):
    """Pairing matrices and coupled averages of one replica chunk."""
    cfg = config_mod.build(raw)
    run = run_pairings(cfg.field, cfg.grid, cfg.time, cfg.radii, cfg.seed,
                       range(lo, hi))
    return run.p, run.f


def _generate(cfg: ExperimentConfig, lo: int, hi: int, workers: int,
              collector) -> list:
    chunks = _chunk_ranges(lo, hi)
    if workers <= 1:
        return [collector(cfg.raw, a, b) for a, b in chunks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(collector, cfg.raw, a, b) for a, b in chunks]
        return [f.result() for f in futures]


# ---------------------------------------------------------------------------
# sample tables

def _averages_table(name: str, cfg: ExperimentConfig, ids: np.ndarray,
                    f: np.ndarray) -> Table:
    table = Table(name, ["replica", "time", "radius", "component", "f"])
    times = cfg.grid.output_times
    for row, rid in enumerate(ids):
        for a, t in enumerate(times):
            for r, R in enumerate(cfg.radii):
                for i in range(f.shape[3]):
                    table.add(int(rid), t, R, i, f[row, a, r, i])
    return table


def _averages_from_table(cfg: ExperimentConfig, table: Table):
    n_t, n_r, d = len(cfg.grid.output_times), len(cfg.radii), cfg.family.shape[0]
    per = n_t * n_r * d
    ids_col = np.asarray(table.column("replica"), dtype=np.int64)
    vals = np.asarray(table.column("f"), dtype=float)
    if ids_col.size == 0 or ids_col.size % per:
        raise ConfigError(f"sample table {table.name} has a partial replica block")
    ids = ids_col.reshape(-1, per)
    if not (ids == ids[:, :1]).all():
        raise ConfigError(f"sample table {table.name} rows are out of order")
    return ids[:, 0], vals.reshape(-1, n_t, n_r, d)


def _pairings_table(cfg: ExperimentConfig, ids: np.ndarray, p: np.ndarray) -> Table:
    table = Table("malliavin_pairings", ["replica", "radius", "i", "j", "p"])
    d = p.shape[2]
    for row, rid in enumerate(ids):
        for r, R in enumerate(cfg.radii):
            for i in range(d):
                for j in range(d):
                    table.add(int(rid), R, i, j, p[row, r, i, j])
    return table


def _pairings_from_table(cfg: ExperimentConfig, table: Table):
    d = cfg.family.shape[0]
    per = len(cfg.radii) * d * d
    ids_col = np.asarray(table.column("replica"), dtype=np.int64)
    vals = np.asarray(table.column("p"), dtype=float)
    if ids_col.size == 0 or ids_col.size % per:
        raise ConfigError("pairing table has a partial replica block")
    ids = ids_col.reshape(-1, per)
    if not (ids == ids[:, :1]).all():
        raise ConfigError("pairing table rows are out of order")
    return ids[:, 0], vals.reshape(-1, len(cfg.radii), d, d)


# ---------------------------------------------------------------------------
# statistics helpers

def _raw_moment(x: np.ndarray, y: np.ndarray):
    """Raw second-moment matrix mean(x_i y_j) with entrywise SEs."""
    prods = np.einsum("mi,mj->mij", x, y)
    m = prods.mean(axis=0)
    se = prods.std(axis=0, ddof=1) / math.sqrt(x.shape[0])
    return m, se


def _sample_cov(x: np.ndarray):
    """Sample covariance with moment-based entrywise SEs."""
    n = x.shape[0]
    xc = x - x.mean(axis=0)
    cov = (xc.T @ xc) / (n - 1)
    m22 = np.einsum("mi,mj->ij", xc * xc, xc * xc) / n
    se = np.sqrt(np.maximum(m22 - cov * cov, 0.0) / n)
    return cov, se


# ---------------------------------------------------------------------------
# experiment kinds

def _run_h1(cfg: ExperimentConfig) -> tuple[dict, dict, list]:
    res = check_h1(cfg.field)
    summary = {"holds": exact(res.holds), "rank": exact(res.rank)}
    t1 = Table("h1_summary", ["holds", "rank", "d", "m"])
    t1.add(res.holds, res.rank, *cfg.family.shape)
    t2 = Table("h1_singular_values", ["index", "value"])
    for k, sv in enumerate(res.singular_values):
        t2.add(k, sv)
    return summary, {t1.name: t1, t2.name: t2}, []


def _run_rate(cfg: ExperimentConfig) -> tuple[dict, dict, list]:
    eta = resolve_eta(cfg)
    t = cfg.time
    c_lim = limit_covariance(eta, t)
    curve = Table("rate_curve", ["radius", "hs_gap", "gap_bound", "cr_min_eig"])
    conv = Table("rate_convergence", ["radius", "i", "j", "cr", "c"])
    hs_points, bound_points = [], []
    for R in cfg.radii:
        cr = prelimit_covariance(eta, t, R)
        hs = float(np.sqrt(np.sum((cr - c_lim) ** 2)))
        gb = gaussian_gap_bound(cr, c_lim)
        curve.add(R, hs, gb, min_eigen_check(cr))
        for i in range(cr.shape[0]):
            for j in range(cr.shape[1]):
                conv.add(R, i, j, cr[i, j], c_lim[i, j])
        hs_points.append((R, hs))
        bound_points.append((R, gb))
    fits = Table("rate_fit", ["quantity", "slope", "intercept", "r2"])
    summary = {"time": exact(t)}
    if len(cfg.radii) >= 3:
        for label, pts in (("hs_gap", hs_points), ("gap_bound", bound_points)):
            fit = rate_fit(pts)
            fits.add(label, fit.slope, fit.intercept, fit.r2)
            summary[f"{label}_slope"] = exact(fit.slope)
    tables = {x.name: x for x in (curve, conv, fits, _eta_table("rate", eta))}
    return summary, tables, []


def _analyze_covariance(cfg: ExperimentConfig, ids: np.ndarray,
                        f: np.ndarray) -> tuple[dict, dict, list]:
    eta = resolve_eta(cfg)
    times = cfg.grid.output_times
    t_main = cfg.time
    main_idx = times.index(t_main)

    summary_tbl = Table("covariance_summary",
                        ["time", "radius", "i", "j", "sample_cov",
                         "sample_cov_se", "cr_quadrature", "cr_quadrature_se",
                         "c_limit", "c_limit_se"])
    for a, t in enumerate(times):
        if t <= 0.0:
            continue
        c_lim = limit_covariance(eta, t)
        c_lim_se = covariance_se(eta, t)
        for r, R in enumerate(cfg.radii):
            cov, cov_se = _sample_cov(f[:, a, r, :])
            cr = prelimit_covariance(eta, t, R)
            cr_se = covariance_se(eta, t, R=R)
            for i in range(cov.shape[0]):
                for j in range(cov.shape[1]):
                    summary_tbl.add(t, R, i, j, cov[i, j], cov_se[i, j],
                                    cr[i, j], cr_se[i, j], c_lim[i, j],
                                    c_lim_se[i, j])

    normal_tbl = Table("covariance_normality",
                       ["time", "radius", "skewness_stat", "kurtosis_stat",
                        "skew_pvalue", "kurt_pvalue"])
    dist_tbl = Table("covariance_distance",
                     ["time", "radius", "gaussian_w2", "sliced_mean",
                      "sliced_max", "sliced_se", "gap_bound", "cr_min_eig"])
    c_main = limit_covariance(eta, t_main)
    per_radius = {}
    for r, R in enumerate(cfg.radii):
        x = f[:, main_idx, r, :]
        mt = mardia(x)
        normal_tbl.add(t_main, R, mt.skewness_stat, mt.kurtosis_stat,
                       mt.skew_pvalue, mt.kurt_pvalue)
        cov, cov_se = _sample_cov(x)
        sw = sliced_w1(x, c_main, cfg.nproj, cfg.seed)
        sw_se = float(sw.values.std(ddof=1) / math.sqrt(sw.values.size))
        cr = prelimit_covariance(eta, t_main, R)
        dist_tbl.add(t_main, R, gaussian_w2(cov, c_main), sw.mean, sw.max,
                     sw_se, gaussian_gap_bound(cr, c_main), min_eigen_check(cr))
        per_radius[f"R={R:g}"] = {
            "sample_var_trace": stat(np.trace(cov), float(np.sqrt(np.sum(np.diag(cov_se) ** 2)))),
            "cr_trace": stat(np.trace(cr), float(np.trace(covariance_se(eta, t_main, R=R)))),
            "mardia_skew_pvalue": exact(mt.skew_pvalue),
            "mardia_kurt_pvalue": exact(mt.kurt_pvalue),
            "sliced_w1_mean": stat(sw.mean, sw_se),
        }
    summary = {"time": exact(t_main), "per_radius": per_radius}
    tables = {x.name: x for x in (summary_tbl, normal_tbl, dist_tbl,
                                  _eta_table("covariance", eta),
                                  _averages_table("covariance_samples", cfg, ids, f))}
    return summary, tables, ["covariance_samples"]


def _analyze_fclt(cfg: ExperimentConfig, ids: np.ndarray,
                  f: np.ndarray) -> tuple[dict, dict, list]:
    eta = resolve_eta(cfg)
    times = cfg.grid.output_times
    radii = cfg.radii

    cross = Table("fclt_crosscov",
                  ["s", "t", "radius", "i", "j", "sample_moment", "sample_se",
                   "limit_quadrature", "limit_se", "windowed_quadrature"])
    orth = Table("fclt_orthogonality",
                 ["s", "t", "radius", "i", "j", "correlation", "se"])
    tight = Table("fclt_tightness",
                  ["s", "t", "radius", "p", "moment", "ratio"])
    for s, t in cfg.pairs:
        a_s, a_t = times.index(s), times.index(t)
        lim = limit_cross_covariance(eta, s, t)
        lim_se = covariance_se(eta, t, s=s)
        for r, R in enumerate(radii):
            fs, ft = f[:, a_s, r, :], f[:, a_t, r, :]
            m, m_se = _raw_moment(fs, ft)
            win = prelimit_cross_covariance(eta, s, t, R)
            for i in range(m.shape[0]):
                for j in range(m.shape[1]):
                    cross.add(s, t, R, i, j, m[i, j], m_se[i, j],
                              lim[i, j], lim_se[i, j], win[i, j])
            corr, corr_se = increment_orthogonality(fs, ft)
            for i in range(corr.shape[0]):
                for j in range(corr.shape[1]):
                    orth.add(s, t, R, i, j, corr[i, j], corr_se[i, j])
            root = math.sqrt(R)
            im = increment_moment(root * fs, root * ft, s, t,
                                  cfg.moment_order, R)
            tight.add(s, t, R, cfg.moment_order, im.moment, im.ratio)

    ratios = [row[-1] for row in tight.rows]
    summary = {
        "pairs": exact(len(cfg.pairs)),
        "tightness_ratio_max": exact(max(ratios)),
        "tightness_ratio_min": exact(min(ratios)),
    }
    tables = {x.name: x for x in (cross, orth, tight, _eta_table("fclt", eta),
                                  _averages_table("fclt_samples", cfg, ids, f))}
    return summary, tables, ["fclt_samples"]


def _analyze_malliavin(cfg: ExperimentConfig, ids: np.ndarray, p: np.ndarray,
                       f: np.ndarray) -> tuple[dict, dict, list]:
    eta = resolve_eta(cfg)
    t = cfg.time

    duality = Table("malliavin_summary",
                    ["radius", "i", "j", "mean_pairing", "mean_pairing_se",
                     "f_moment", "f_moment_se", "cr_quadrature"])
    stein_tbl = Table("malliavin_stein",
                      ["radius", "sum_varhat", "sum_varhat_se", "bound",
                       "cr_min_eig", "cr_op_norm"])
    var_pts, bound_pts = [], []
    per_radius = {}
    for r, R in enumerate(cfg.radii):
        pr = p[:, r]
        n = pr.shape[0]
        mean_p = pr.mean(axis=0)
        mean_se = pr.std(axis=0, ddof=1) / math.sqrt(n)
        fm, fm_se = _raw_moment(f[:, r, :], f[:, r, :])
        cr = prelimit_covariance(eta, t, R)
        for i in range(mean_p.shape[0]):
            for j in range(mean_p.shape[1]):
                duality.add(R, i, j, mean_p[i, j], mean_se[i, j],
                            fm[i, j], fm_se[i, j], cr[i, j])
        est = stein_bound(pr, cr)
        sum_var = float(np.sum(est.varhat))
        sum_var_se = float(np.sqrt(np.sum(est.varhat_se ** 2)))
        stein_tbl.add(R, sum_var, sum_var_se, est.bound,
                      min_eigen_check(cr), op_norm(cr))
        var_pts.append((R, sum_var))
        bound_pts.append((R, est.bound))
        per_radius[f"R={R:g}"] = {
            "sum_varhat": stat(sum_var, sum_var_se),
            "stein_bound": stat(est.bound, 0.5 * est.bound * sum_var_se / max(sum_var, 1e-300)),
        }

    rates = Table("malliavin_rates", ["quantity", "slope", "intercept", "r2"])
    summary = {"time": exact(t), "per_radius": per_radius}
    if len(cfg.radii) >= 3:
        for label, pts in (("sum_varhat", var_pts), ("stein_bound", bound_pts)):
            fit = rate_fit(pts)
            rates.add(label, fit.slope, fit.intercept, fit.r2)
            summary[f"{label}_slope"] = exact(fit.slope)
    tables = {x.name: x for x in (duality, stein_tbl, rates,
                                  _eta_table("malliavin", eta),
                                  _pairings_table(cfg, ids, p),
                                  _malliavin_f_table(cfg, ids, f))}
    return summary, tables, ["malliavin_pairings", "malliavin_samples"]


def _malliavin_f_table(cfg: ExperimentConfig, ids: np.ndarray,
                       f: np.ndarray) -> Table:
    table = Table("malliavin_samples", ["replica", "radius", "component", "f"])
    for row, rid in enumerate(ids):
        for r, R in enumerate(cfg.radii):
            for i in range(f.shape[2]):
                table.add(int(rid), R, i, f[row, r, i])
    return table


def _malliavin_f_from_table(cfg: ExperimentConfig, table: Table):
    d = cfg.family.shape[0]
    per = len(cfg.radii) * d
    vals = np.asarray(table.column("f"), dtype=float)
    if vals.size % per:
        raise ConfigError("malliavin sample table has a partial replica block")
    return vals.reshape(-1, len(cfg.radii), d)


def _run_oracle(cfg: ExperimentConfig) -> tuple[dict, dict, list]:
    sol = pam_second_moment(cfg.oracle_coupling, cfg.grid.T,
                            steps=cfg.oracle_steps, tol=cfg.oracle_tolerance)
    pam_tbl = Table("oracle_pam", ["time", "value"])
    stride = max(1, sol.times.size // 512)
    for a in range(0, sol.times.size, stride):
        pam_tbl.add(sol.times[a], sol.values[a])
    if (sol.times.size - 1) % stride:
        pam_tbl.add(sol.times[-1], sol.values[-1])

    t, R = cfg.time, cfg.radii[-1]
    law = constant_sigma_law(np.ones((1, 1)), t, R)
    summ_tbl = Table("oracle_summary", ["quantity", "value"])
    summ_tbl.add("pam_horizon_value", sol.values[-1])
    summ_tbl.add("pam_error_estimate", sol.error_estimate)
    summ_tbl.add("additive_point_variance", additive_point_variance(t))
    summ_tbl.add("constant_c", float(law.C.a[0, 0]))
    summ_tbl.add("constant_cr", float(law.CR.a[0, 0]))
    summary = {
        "coupling": exact(cfg.oracle_coupling),
        "pam_horizon_value": exact(sol.values[-1]),
        "additive_point_variance": exact(additive_point_variance(t)),
    }
    return summary, {pam_tbl.name: pam_tbl, summ_tbl.name: summ_tbl}, []


# ---------------------------------------------------------------------------
# entry points

def run(cfg: ExperimentConfig, replica_range: Optional[tuple] = None,
        workers: int = 1) -> Report:
    """Run the configured experiment over a replica range."""
    t0 = _time.monotonic()
    lo, hi = replica_range if replica_range is not None else (0, cfg.replicas)
    if lo < 0 or hi <= lo:
        raise ConfigError(f"replica range [{lo}, {hi}) is empty or negative")

    if cfg.kind == "h1":
        summary, tables, sample_tables = _run_h1(cfg)
    elif cfg.kind == "rate":
        summary, tables, sample_tables = _run_rate(cfg)
    elif cfg.kind == "oracle":
        summary, tables, sample_tables = _run_oracle(cfg)
    elif cfg.kind in ("covariance", "fclt"):
        parts = _generate(cfg, lo, hi, workers, _collect_averages)
        f = np.concatenate(parts, axis=0)
        ids = np.arange(lo, hi)
        if cfg.kind == "covariance":
            summary, tables, sample_tables = _analyze_covariance(cfg, ids, f)
        else:
            summary, tables, sample_tables = _analyze_fclt(cfg, ids, f)
    elif cfg.kind == "malliavin":
        parts = _generate(cfg, lo, hi, workers, _collect_pairings)
        p = np.concatenate([a for a, _ in parts], axis=0)
        f = np.concatenate([b for _, b in parts], axis=0)
        ids = np.arange(lo, hi)
        summary, tables, sample_tables = _analyze_malliavin(cfg, ids, p, f)
    else:  # pragma: no cover - guarded by config validation
        raise ConfigError(f"unknown experiment kind {cfg.kind!r}")

    return Report(kind=cfg.kind, config=cfg.raw, config_hash=cfg.config_hash,
                  replica_ranges=[[lo, hi]], summary=summary, tables=tables,
                  sample_tables=sample_tables,
                  timing={"wall_seconds": _time.monotonic() - t0,
                          "replicas": hi - lo, "workers": workers})


def merge(directories: Sequence[str]) -> Report:
    """Merge partial reports produced under one configuration and seed.

    Inputs must share the configuration hash and kind, with pairwise disjoint
    replica ranges; sample rows are pooled in replica order and the analysis
    stage reruns on the union, so the result matches the single full run
    bit-for-bit.
    """
    t0 = _time.monotonic()
    if not directories:
        raise ConfigError("merge needs at least one partial report")
    docs, tabsets = [], []
    for dirpath in directories:
        doc, tables = load_report(dirpath)
        docs.append(doc)
        tabsets.append(tables)
    kind = docs[0]["kind"]
    chash = docs[0]["config_hash"]
    for doc in docs[1:]:
        if doc["config_hash"] != chash:
            raise ConfigError("refusing to merge reports with mismatched "
                              f"config hashes ({doc['config_hash'][:12]} != {chash[:12]})")
        if doc["kind"] != kind:
            raise ConfigError("refusing to merge reports of different kinds")
    if kind not in ("covariance", "fclt", "malliavin"):
        raise ConfigError(f"experiment kind {kind!r} has no samples to merge")

    cfg = config_mod.build(docs[0]["config"])
    ranges = sorted(tuple(r) for doc in docs for r in doc["replica_ranges"])
    for (a1, b1), (a2, b2) in zip(ranges, ranges[1:]):
        if a2 < b1:
            raise ConfigError(f"replica ranges [{a1},{b1}) and [{a2},{b2}) overlap")

    if kind == "malliavin":
        parts = []
        for doc, tables in zip(docs, tabsets):
            ids, p = _pairings_from_table(cfg, tables["malliavin_pairings"])
            f = _malliavin_f_from_table(cfg, tables["malliavin_samples"])
            parts.append((ids, p, f))
        parts.sort(key=lambda x: x[0][0])
        ids = np.concatenate([x[0] for x in parts])
        _check_disjoint(ids)
        p = np.concatenate([x[1] for x in parts], axis=0)
        f = np.concatenate([x[2] for x in parts], axis=0)
        summary, tables, sample_tables = _analyze_malliavin(cfg, ids, p, f)
    else:
        name = f"{kind}_samples"
        parts = []
        for doc, tables in zip(docs, tabsets):
            parts.append(_averages_from_table(cfg, tables[name]))
        parts.sort(key=lambda x: x[0][0])
        ids = np.concatenate([x[0] for x in parts])
        _check_disjoint(ids)
        f = np.concatenate([x[1] for x in parts], axis=0)
        if kind == "covariance":
            summary, tables, sample_tables = _analyze_covariance(cfg, ids, f)
        else:
            summary, tables, sample_tables = _analyze_fclt(cfg, ids, f)

    return Report(kind=kind, config=cfg.raw, config_hash=chash,
                  replica_ranges=_coalesce(ranges), summary=summary,
                  tables=tables, sample_tables=sample_tables,
                  timing={"wall_seconds": _time.monotonic() - t0,
                          "replicas": int(ids.size), "workers": 1})


def _check_disjoint(ids: np.ndarray) -> None:
    if np.unique(ids).size != ids.size:
        raise ConfigError("merged batches contain duplicate replica ids")


def _coalesce(ranges: list) -> list:
    out = []
    for a, b in ranges:
        if out and out[-1][1] == a:
            out[-1][1] = b
        else:
            out.append([a, b])
    return [list(r) for r in out]
