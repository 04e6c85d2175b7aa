/** Readers for the laboratory's public table formats.
 *
 * points.csv and diagnostics CSVs are plain comma-separated files with a
 * header row and shortest-round-trip float cells; report.jsonl is one
 * JSON object per line.  Parsing is strict: a malformed numeric cell or
 * a missing required column is an error, never a silent NaN.
 */

import { readFileSync } from "node:fs";
import Papa from "papaparse";

import { DataError, SchemaError } from "./errors.js";

export interface Table {
  /** Path of origin for error messages. */
  path: string;
  columns: string[];
  rows: Record<string, number>[];
}

export function readCsv(path: string): Table {
  const text = readFileSync(path, "utf-8");
  return parseCsv(text, path);
}

export function parseCsv(text: string, path: string): Table {
  // explicit delimiter: auto-detection reports its own error on empty
  // or single-column input and would mask the messages below
  const parsed = Papa.parse<string[]>(text.trim(),
                                      { delimiter: ",",
                                        skipEmptyLines: true });
  if (parsed.errors.length > 0) {
    const first = parsed.errors[0]!;
    throw new DataError(`${path}: malformed CSV (${first.message})`);
  }
  const lines = parsed.data;
  if (lines.length === 0) {
    throw new DataError(`${path}: empty file, expected a header row`);
  }
  const columns = lines[0]!.map((c) => c.trim());
  const rows: Record<string, number>[] = [];
  for (const cells of lines.slice(1)) {
    if (cells.length !== columns.length) {
      throw new DataError(
        `${path}: row has ${cells.length} cells, header has ${columns.length}`,
      );
    }
    const row: Record<string, number> = {};
    cells.forEach((cell, i) => {
      const v = Number(cell);
      if (cell.trim() === "" || Number.isNaN(v)) {
        throw new DataError(
          `${path}: non-numeric cell "${cell}" in column "${columns[i]}"`,
        );
      }
      row[columns[i]!] = v;
    });
    rows.push(row);
  }
  return { path, columns, rows };
}

/** Throw a SchemaError naming the first missing column. */
export function requireColumns(table: Table, names: string[]): void {
  for (const name of names) {
    if (!table.columns.includes(name)) {
      throw new SchemaError(`missing column "${name}" in ${table.path}`);
    }
  }
}

/** Column values in row order. */
export function column(table: Table, name: string): number[] {
  requireColumns(table, [name]);
  return table.rows.map((r) => r[name]!);
}

export interface StudyReportLine {
  kind: string;
  outcome: string;
  verdicts: Record<string, boolean>;
  [key: string]: unknown;
}

export function readReportJsonl(path: string): StudyReportLine[] {
  const text = readFileSync(path, "utf-8");
  const out: StudyReportLine[] = [];
  for (const line of text.split("\n")) {
    if (line.trim() === "") continue;
    let rec: unknown;
    try {
      rec = JSON.parse(line);
    } catch {
      throw new DataError(`${path}: malformed JSON line`);
    }
    const obj = rec as StudyReportLine;
    if (typeof obj.kind !== "string" || typeof obj.outcome !== "string") {
      throw new DataError(`${path}: report line lacks kind/outcome`);
    }
    out.push(obj);
  }
  return out;
}
