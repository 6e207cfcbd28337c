/** Loading of bbmlab run directories (run.json + estimates/outcomes). */

import { existsSync, readFileSync, readdirSync, statSync } from "node:fs";
import { join, basename } from "node:path";

import { Table, readTable } from "./csv.js";

export interface EstimateRow {
  estimand: string;
  value: string;
  ci_low: string;
  ci_high: string;
  n_used: string;
  n_censored: string;
  note: string;
}

export interface RunData {
  dir: string;
  name: string;
  config: any;
  configHash: string;
  estimates: Map<string, EstimateRow>;
}

export function loadRun(dir: string): RunData {
  const metaPath = join(dir, "run.json");
  const meta = JSON.parse(readFileSync(metaPath, "utf8"));
  const table = readTable(join(dir, "estimates.csv"));
  const estimates = new Map<string, EstimateRow>();
  for (const r of table.rows) {
    estimates.set(r[0], {
      estimand: r[0],
      value: r[1],
      ci_low: r[2],
      ci_high: r[3],
      n_used: r[4],
      n_censored: r[5],
      note: r[6] ?? "",
    });
  }
  if (meta.config_hash !== table.meta.config) {
    throw new Error(`${dir}: estimates.csv hash ${table.meta.config} != run.json ${meta.config_hash}`);
  }
  return {
    dir,
    name: basename(dir),
    config: meta.config,
    configHash: meta.config_hash,
    estimates,
  };
}

/** All runs under root (or root itself), sorted by directory name. */
export function loadRuns(root: string): RunData[] {
  if (existsSync(join(root, "run.json"))) return [loadRun(root)];
  const out: RunData[] = [];
  for (const entry of readdirSync(root).sort()) {
    const dir = join(root, entry);
    if (statSync(dir).isDirectory() && existsSync(join(dir, "run.json"))) {
      out.push(loadRun(dir));
    }
  }
  if (out.length === 0) throw new Error(`no bbmlab runs found under ${root}`);
  return out;
}

export function outcomesTable(run: RunData): Table {
  return readTable(join(run.dir, "outcomes.csv"));
}
