/**
 * Reader for the sheavg columnar tables: a header row followed by plain
 * numeric cells (17-significant-digit floats), comma separated, no quoting.
 */

import { readFileSync } from "fs";
import { join } from "path";

export class SchemaError extends Error {}

export type Cell = number | string;

export interface Table {
  name: string;
  columns: string[];
  rows: Cell[][];
}

export function parseTable(name: string, text: string): Table {
  const lines = text.split("\n").filter((ln) => ln.length > 0);
  if (lines.length < 1) {
    throw new SchemaError(`table ${name} is empty`);
  }
  const columns = lines[0].split(",");
  const rows = lines.slice(1).map((ln, i) => {
    const cells = ln.split(",");
    if (cells.length !== columns.length) {
      throw new SchemaError(
        `table ${name} row ${i + 1} has ${cells.length} cells, expected ${columns.length}`,
      );
    }
    return cells.map((cell): Cell => {
      const n = Number(cell);
      return cell !== "" && !Number.isNaN(n) ? n : cell;
    });
  });
  if (rows.length === 0) {
    throw new SchemaError(`table ${name} has a header but no rows`);
  }
  return { name, columns, rows };
}

export function loadTable(dir: string, name: string): Table {
  const path = join(dir, `${name}.csv`);
  let text: string;
  try {
    text = readFileSync(path, "utf8");
  } catch (err) {
    throw new SchemaError(`cannot read table ${path}: ${(err as Error).message}`);
  }
  return parseTable(name, text);
}

/** Column accessor; a missing column is a schema error naming the column. */
export function column(table: Table, name: string): number[] {
  const idx = columnIndex(table, name);
  return table.rows.map((row, r) => {
    const v = row[idx];
    if (typeof v !== "number" || !Number.isFinite(v)) {
      throw new SchemaError(
        `table ${table.name} column '${name}' row ${r + 1} is not numeric`,
      );
    }
    return v;
  });
}

export function textColumn(table: Table, name: string): string[] {
  const idx = columnIndex(table, name);
  return table.rows.map((row) => String(row[idx]));
}

export function columnIndex(table: Table, name: string): number {
  const idx = table.columns.indexOf(name);
  if (idx < 0) {
    throw new SchemaError(
      `table ${table.name} is missing required column '${name}' ` +
        `(has: ${table.columns.join(", ")})`,
    );
  }
  return idx;
}

export function requireColumns(table: Table, names: string[]): void {
  for (const name of names) {
    column(table, name);
  }
}

/** Rows for which every (column, value) predicate matches exactly. */
export function filterRows(
  table: Table,
  match: Record<string, number>,
): Cell[][] {
  const idx = Object.keys(match).map((k) => {
    const i = table.columns.indexOf(k);
    if (i < 0) {
      throw new SchemaError(`table ${table.name} is missing column '${k}'`);
    }
    return [i, match[k]] as const;
  });
  return table.rows.filter((row) => idx.every(([i, v]) => row[i] === v));
}

export function uniqueSorted(values: number[]): number[] {
  return [...new Set(values)].sort((a, b) => a - b);
}
