/**
 * The five figure kinds rendered from sheavg tables:
 *
 *   convergence  C^R_ij(t) against R with the limiting C_ij asymptotes
 *   rate         log-log gap decay with fitted and reference slopes
 *   qq           normal quantile plot of the averaged field samples
 *   paths        per-replica unnormalized-average trajectories with envelope
 *   stein        pairing-variance and Stein-bound decay with fitted slopes
 */

import { Cell, SchemaError, Table, column, columnIndex, filterRows,
         loadTable, requireColumns, uniqueSorted } from "./csv.js";
import { PALETTE, Figure } from "./svg.js";
import { normalQuantile, powerFit, quantile } from "./stats.js";

export const FIGURE_KINDS = ["convergence", "rate", "qq", "paths", "stein"] as const;
export type FigureKind = (typeof FIGURE_KINDS)[number];

export function render(kind: FigureKind, dir: string): string {
  switch (kind) {
    case "convergence":
      return renderConvergence(loadTable(dir, "rate_convergence"));
    case "rate":
      return renderRate(loadTable(dir, "rate_curve"));
    case "qq":
      return renderQq(findTable(dir, ["covariance_samples", "fclt_samples"]));
    case "paths":
      return renderPaths(findTable(dir, ["fclt_samples", "covariance_samples"]));
    case "stein":
      return renderStein(loadTable(dir, "malliavin_stein"));
    default:
      throw new SchemaError(`unknown figure kind '${kind}'`);
  }
}

function findTable(dir: string, names: string[]): Table {
  const errors: string[] = [];
  for (const name of names) {
    try {
      return loadTable(dir, name);
    } catch (err) {
      errors.push((err as Error).message);
    }
  }
  throw new SchemaError(errors.join("; "));
}

export function renderConvergence(table: Table): string {
  requireColumns(table, ["radius", "i", "j", "cr", "c"]);
  const radii = uniqueSorted(column(table, "radius"));
  const is = uniqueSorted(column(table, "i"));
  const js = uniqueSorted(column(table, "j"));
  const crAll = column(table, "cr").concat(column(table, "c"));
  const fig = new Figure("Windowed covariance: C^R(t) approaching C(t)");
  const pad = 0.05 * (Math.max(...crAll) - Math.min(...crAll) || 1);
  const frame = fig.frame(radii[0], radii[radii.length - 1],
    Math.min(...crAll) - pad, Math.max(...crAll) + pad,
    { xlog: true, xlabel: "averaging radius R", ylabel: "covariance entry" });
  const legend: Array<[string, string]> = [];
  let k = 0;
  for (const i of is) {
    for (const j of js) {
      if (j < i) continue;
      const rows = filterRows(table, { i, j });
      if (rows.length === 0) continue;
      const color = PALETTE[k % PALETTE.length];
      const rIdx = columnIndex(table, "radius");
      const crIdx = columnIndex(table, "cr");
      const cIdx = columnIndex(table, "c");
      const sorted = [...rows].sort((a, b) => Number(a[rIdx]) - Number(b[rIdx]));
      const rs = sorted.map((r) => Number(r[rIdx]));
      const crs = sorted.map((r) => Number(r[crIdx]));
      fig.polyline(frame, rs, crs, color);
      fig.points(frame, rs, crs, color);
      fig.polyline(frame, [radii[0], radii[radii.length - 1]],
        [Number(sorted[0][cIdx]), Number(sorted[0][cIdx])], color,
        { width: 1, dash: "6 4" });
      legend.push([`C^R_${i}${j} (dashed: C_${i}${j})`, color]);
      k += 1;
    }
  }
  fig.legend(legend);
  return fig.render();
}

/** Shared log-log decay rendering for the rate and stein figures. */
function decayFigure(title: string, xlabel: string,
                     series: Array<{ label: string; xs: number[]; ys: number[] }>,
                     references: number[]): string {
  const fig = new Figure(title);
  const allX = series.flatMap((s) => s.xs);
  const allY = series.flatMap((s) => s.ys);
  if (allY.some((v) => v <= 0)) {
    throw new SchemaError("decay figures need positive values");
  }
  const frame = fig.frame(Math.min(...allX), Math.max(...allX),
    Math.min(...allY) * 0.8, Math.max(...allY) * 1.25,
    { xlog: true, ylog: true, xlabel, ylabel: "value" });
  const legend: Array<[string, string]> = [];
  series.forEach((s, k) => {
    const color = PALETTE[k % PALETTE.length];
    fig.polyline(frame, s.xs, s.ys, color);
    fig.points(frame, s.xs, s.ys, color);
    const fit = powerFit(s.xs, s.ys);
    legend.push([`${s.label}: slope ${fit.slope.toFixed(2)}`, color]);
  });
  references.forEach((slope, k) => {
    const x0 = Math.min(...allX);
    const x1 = Math.max(...allX);
    const y0 = Math.max(...allY);
    const color = "#888888";
    fig.polyline(frame, [x0, x1], [y0, y0 * (x1 / x0) ** slope], color,
      { width: 1, dash: "3 4" });
    fig.label(frame.x(x1) - 80, frame.y(y0 * (x1 / x0) ** slope) - 6 - 12 * k,
      `reference R^${slope}`, color, 11);
  });
  fig.legend(legend);
  return fig.render();
}

export function renderRate(table: Table): string {
  requireColumns(table, ["radius", "hs_gap", "gap_bound"]);
  const xs = column(table, "radius");
  return decayFigure("Gaussian-part decay: ||C^R - C|| and the pairwise bound",
    "averaging radius R",
    [
      { label: "||C^R - C||_HS", xs, ys: column(table, "hs_gap") },
      { label: "Gaussian gap bound", xs, ys: column(table, "gap_bound") },
    ],
    [-1]);
}

export function renderStein(table: Table): string {
  requireColumns(table, ["radius", "sum_varhat", "bound"]);
  const xs = column(table, "radius");
  return decayFigure("Stein-bound decay across averaging radii",
    "averaging radius R",
    [
      { label: "sum of pairing variances", xs, ys: column(table, "sum_varhat") },
      { label: "Stein bound", xs, ys: column(table, "bound") },
    ],
    [-1, -0.5]);
}

export function renderQq(table: Table): string {
  requireColumns(table, ["replica", "time", "radius", "component", "f"]);
  const time = Math.max(...column(table, "time"));
  const radius = Math.max(...column(table, "radius"));
  const rows = filterRows(table, { time, radius, component: 0 });
  const fIdx = columnIndex(table, "f");
  const sample = rows.map((r) => Number(r[fIdx])).sort((a, b) => a - b);
  if (sample.length < 8) {
    throw new SchemaError("qq figure needs at least 8 samples");
  }
  const m = sample.reduce((a, b) => a + b, 0) / sample.length;
  const sd = Math.sqrt(sample.reduce((a, b) => a + (b - m) ** 2, 0) / (sample.length - 1));
  const std = sample.map((v) => (v - m) / sd);
  const theo = std.map((_, i) => normalQuantile((i + 0.5) / std.length));
  const lo = Math.min(theo[0], std[0]);
  const hi = Math.max(theo[theo.length - 1], std[std.length - 1]);
  const fig = new Figure(`Normal quantile plot of F^R(t)  (t=${time}, R=${radius})`);
  const frame = fig.frame(lo, hi, lo, hi,
    { xlabel: "normal quantiles", ylabel: "standardized sample quantiles" });
  fig.polyline(frame, [lo, hi], [lo, hi], "#888888", { width: 1, dash: "5 4" });
  fig.points(frame, theo, std, PALETTE[0], 2);
  return fig.render();
}

export function renderPaths(table: Table): string {
  requireColumns(table, ["replica", "time", "radius", "component", "f"]);
  const radius = Math.max(...column(table, "radius"));
  const times = uniqueSorted(
    filterRows(table, { radius }).map((r) => Number(r[columnIndex(table, "time")])));
  if (times.length < 2) {
    throw new SchemaError("paths figure needs at least two output times");
  }
  const root = Math.sqrt(radius);
  const byReplica = new Map<number, number[]>();
  const repIdx = columnIndex(table, "replica");
  const timeIdx = columnIndex(table, "time");
  const fIdx = columnIndex(table, "f");
  for (const row of filterRows(table, { radius, component: 0 })) {
    const rep = Number(row[repIdx]);
    const path = byReplica.get(rep) ?? new Array(times.length).fill(NaN);
    path[times.indexOf(Number(row[timeIdx]))] = root * Number(row[fIdx]);
    byReplica.set(rep, path);
  }
  const paths = [...byReplica.entries()].sort((a, b) => a[0] - b[0]).map((e) => e[1]);
  const flat = paths.flat();
  const fig = new Figure(`Unnormalized average paths G^R(t)  (R=${radius})`);
  const pad = 0.05 * (Math.max(...flat) - Math.min(...flat) || 1);
  const frame = fig.frame(0, times[times.length - 1],
    Math.min(...flat) - pad, Math.max(...flat) + pad,
    { xlabel: "time", ylabel: "G^R(t)" });
  for (const path of paths.slice(0, 40)) {
    fig.polyline(frame, [0, ...times], [0, ...path], "#b8cfe6", { width: 0.8 });
  }
  for (const [p, color] of [[0.05, "#c94f30"], [0.95, "#c94f30"],
                            [0.5, "#1f3fa6"]] as const) {
    const env = times.map((_, i) =>
      quantile(paths.map((pp) => pp[i]).sort((a, b) => a - b), p));
    fig.polyline(frame, [0, ...times], [0, ...env], color, { width: 2 });
  }
  fig.legend([["sample paths", "#b8cfe6"], ["5% / 95% envelope", "#c94f30"],
              ["median", "#1f3fa6"]]);
  return fig.render();
}
