/** File-level orchestration: read inputs, build, write the SVG. */

import { mkdirSync, writeFileSync } from "node:fs";
import { dirname } from "node:path";

import { readCsv, readReportJsonl, type StudyReportLine } from "./csv.js";
import { DataError } from "./errors.js";
import { buildFigure } from "./figures.js";
import type { FigureSpec } from "./figspec.js";

export interface RenderResult {
  output: string;
  warnings: string[];
}

export function renderFigure(spec: FigureSpec): RenderResult {
  const tables = spec.inputs.map(readCsv);
  let report: StudyReportLine | undefined;
  if (spec.report) {
    const lines = readReportJsonl(spec.report);
    if (lines.length === 0) {
      throw new DataError(`${spec.report}: empty report`);
    }
    report = lines[0];
  }
  const built = buildFigure(spec, tables, report);
  mkdirSync(dirname(spec.output), { recursive: true });
  writeFileSync(spec.output, built.svg, "utf-8");
  return { output: spec.output, warnings: built.warnings };
}
