/**
 * Reader for the bbmlab CSV formats: one `# bbmlab-... v1, k=v, ...`
 * comment line, a header row, then plain comma-separated cells (the
 * writers never emit commas inside cells).  Raw cell strings are kept
 * so downstream sidecars can echo values without reformatting.
 */

import { readFileSync } from "node:fs";

export interface Table {
  path: string;
  meta: Record<string, string>;
  columns: string[];
  rows: string[][];
}

export class SchemaError extends Error {}

export function readTable(path: string): Table {
  const text = readFileSync(path, "utf8");
  const lines = text.split("\n");
  if (lines.length < 2 || !lines[0].startsWith("#")) {
    throw new SchemaError(`${path}: missing versioned header comment`);
  }
  const meta: Record<string, string> = {};
  for (const part of lines[0].replace(/^#\s*/, "").split(", ")) {
    const eq = part.indexOf("=");
    if (eq > 0) meta[part.slice(0, eq)] = part.slice(eq + 1);
    else meta.format = part;
  }
  const columns = lines[1].trim().split(",");
  const rows: string[][] = [];
  for (const line of lines.slice(2)) {
    if (line.trim() === "") continue;
    rows.push(line.split(","));
  }
  return { path, meta, columns, rows };
}

export function columnIndex(table: Table, name: string): number {
  const i = table.columns.indexOf(name);
  if (i < 0) {
    throw new SchemaError(
      `${table.path}: required column '${name}' not found (have: ${table.columns.join(", ")})`,
    );
  }
  return i;
}

export function column(table: Table, name: string): string[] {
  const i = columnIndex(table, name);
  return table.rows.map((r) => r[i]);
}

export function num(cell: string): number {
  if (cell === "" || cell === undefined) return NaN;
  const v = Number(cell);
  if (Number.isNaN(v)) throw new SchemaError(`cannot parse number from '${cell}'`);
  return v;
}
