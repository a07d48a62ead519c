/**
 * CSV loading and schema validation for the experiment artifacts.
 *
 * Both input files are strict: comma separator, header row, no quoting.
 * Validation failures carry the 1-based line number of the offending row
 * (the header is line 1).
 */

import fs from "fs";
import Papa from "papaparse";

export class CsvError extends Error {
  readonly line: number;

  constructor(message: string, line: number) {
    super(`${message} (line ${line})`);
    this.line = line;
  }
}

export interface ScatterRow {
  setId: string;
  provenance: string;
  meanBeta: number;
  meanTrace: number;
}

export interface SensorMapRow {
  setId: string;
  provenance: string;
  x1: number;
  x2: number;
}

export interface Layout {
  domain: [number, number, number, number];
  subdomainBoundaries: number[];
  inflowEdge: string;
}

export const DEFAULT_LAYOUT: Layout = {
  domain: [0, 1, 0, 1],
  subdomainBoundaries: [1 / 3, 2 / 3],
  inflowEdge: "bottom",
};

function parseTable(path: string, required: string[]): Record<string, string>[] {
  const text = fs.readFileSync(path, "utf-8");
  const parsed = Papa.parse<Record<string, string>>(text.trim(), {
    header: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    const err = parsed.errors[0];
    throw new CsvError(`cannot parse ${path}: ${err.message}`, (err.row ?? 0) + 2);
  }
  const fields = parsed.meta.fields ?? [];
  for (const name of required) {
    if (!fields.includes(name)) {
      throw new CsvError(`${path} is missing the '${name}' column`, 1);
    }
  }
  if (parsed.data.length === 0) {
    throw new CsvError(`${path} contains no data rows`, 1);
  }
  return parsed.data;
}

function toNumber(raw: string, column: string, line: number): number {
  const value = Number(raw);
  if (raw === undefined || raw === "" || !Number.isFinite(value)) {
    throw new CsvError(`column '${column}' holds a non-numeric value '${raw}'`, line);
  }
  return value;
}

export function readScatter(path: string): ScatterRow[] {
  const rows = parseTable(path, ["set_id", "provenance", "mean_beta", "mean_trace"]);
  return rows.map((row, i) => {
    const line = i + 2;
    const meanBeta = toNumber(row.mean_beta, "mean_beta", line);
    const meanTrace = toNumber(row.mean_trace, "mean_trace", line);
    if (meanBeta < 0) {
      throw new CsvError(`mean_beta must be non-negative, got ${meanBeta}`, line);
    }
    if (meanTrace <= 0) {
      throw new CsvError(`mean_trace must be positive, got ${meanTrace}`, line);
    }
    return { setId: row.set_id, provenance: row.provenance, meanBeta, meanTrace };
  });
}

export function readSensorMap(path: string): SensorMapRow[] {
  const rows = parseTable(path, ["set_id", "provenance", "x1", "x2"]);
  return rows.map((row, i) => {
    const line = i + 2;
    const x1 = toNumber(row.x1, "x1", line);
    const x2 = toNumber(row.x2, "x2", line);
    if (x1 < 0 || x1 > 1 || x2 < 0 || x2 > 1) {
      throw new CsvError(`sensor position (${x1}, ${x2}) is outside the unit square`, line);
    }
    return { setId: row.set_id, provenance: row.provenance, x1, x2 };
  });
}

export function readLayout(path: string | undefined): Layout {
  if (!path) return DEFAULT_LAYOUT;
  const raw = JSON.parse(fs.readFileSync(path, "utf-8"));
  return {
    domain: raw.domain ?? DEFAULT_LAYOUT.domain,
    subdomainBoundaries: raw.subdomain_boundaries ?? DEFAULT_LAYOUT.subdomainBoundaries,
    inflowEdge: raw.inflow_edge ?? DEFAULT_LAYOUT.inflowEdge,
  };
}
