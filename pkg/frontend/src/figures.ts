/** The four figure builders.
 *
 * Pure functions from parsed tables to SVG text; all file traffic lives
 * in render.ts.  Ladder-style figures annotate the fitted log-log slope
 * to three decimals.  A table with a valid header but no rows renders
 * as an empty frame with a warning annotation instead of failing, so a
 * dry pipeline still produces an artifact.
 */

import type { Table } from "./csv.js";
import { column, requireColumns, type StudyReportLine } from "./csv.js";
import { DataError, SpecError } from "./errors.js";
import type { FigureSpec } from "./figspec.js";
import { logLogSlope } from "./regression.js";
import {
  PALETTE, PLOT, axes, circleEl, document as svgDocument, fmt, lineEl,
  makeScale, polylineEl, textEl, type AxisScale, type Scale,
} from "./svg.js";

export interface BuiltFigure {
  svg: string;
  warnings: string[];
}

export function buildFigure(
  spec: FigureSpec,
  tables: Table[],
  report?: StudyReportLine,
): BuiltFigure {
  const warnings: string[] = [];
  const chrome: string[] = [
    textEl((PLOT.x0 + PLOT.x1) / 2, 24, spec.title,
           { anchor: "middle", size: 14 }),
  ];
  if (report) {
    const color = report.outcome === "pass" ? "#2ca02c" : "#d62728";
    chrome.push(textEl(PLOT.x1, HEIGHT_FOOT,
                       `study ${report.kind}: ${report.outcome}`,
                       { anchor: "end", size: 10, fill: color }));
  }

  let body: string;
  switch (spec.kind) {
    case "ladder":
      body = ladderBody(spec, tables[0]!, warnings);
      break;
    case "measure_distance":
      body = measureBody(spec, tables[0]!, warnings);
      break;
    case "tail_curves":
      body = tailBody(spec, tables[0]!, warnings);
      break;
    case "envelope":
      body = envelopeBody(spec, tables, warnings);
      break;
  }
  return { svg: svgDocument(chrome.join("\n") + "\n" + body), warnings };
}

const HEIGHT_FOOT = 432;   // footer baseline, below the x-axis label

// ------------------------------------------------------------------ shared

function emptyAxes(message: string, warnings: string[]): string {
  warnings.push(message);
  const xs = makeScale("linear", [0, 1], [PLOT.x0, PLOT.x1]);
  const ys = makeScale("linear", [0, 1], [PLOT.y0, PLOT.y1]);
  return [
    axes(xs, ys, "", ""),
    textEl((PLOT.x0 + PLOT.x1) / 2, (PLOT.y0 + PLOT.y1) / 2,
           `no data: ${message}`, { anchor: "middle", fill: "#d62728" }),
  ].join("\n");
}

function checkPositive(
  values: number[], columnName: string, axis: "x" | "y", kind: AxisScale,
): void {
  if (kind !== "log") return;
  const bad = values.find((v) => !(v > 0));
  if (bad !== undefined) {
    throw new DataError(
      `log ${axis}-axis needs positive values; column "${columnName}" ` +
      `has ${fmt(bad)} (set axes.${axis} to "linear")`);
  }
}

function domain(values: number[]): [number, number] {
  return [Math.min(...values), Math.max(...values)];
}

function scalePair(
  spec: FigureSpec, xsVals: number[], ysVals: number[],
): { xs: Scale; ys: Scale } {
  return {
    xs: makeScale(spec.axes.x, domain(xsVals), [PLOT.x0, PLOT.x1]),
    ys: makeScale(spec.axes.y, domain(ysVals), [PLOT.y0, PLOT.y1]),
  };
}

function curve(
  xs: Scale, ys: Scale, xv: number[], yv: number[], color: string,
  opts: { dash?: string } = {},
): string {
  const pts: Array<[number, number]> = xv.map(
    (x, i) => [xs.map(x), ys.map(yv[i]!)]);
  const parts = [polylineEl(pts, color, opts)];
  if (!opts.dash) {
    for (const [x, y] of pts) parts.push(circleEl(x, y, 3, color));
  }
  return parts.join("\n");
}

function slopeAnnotation(xv: number[], yv: number[]): string {
  const slope = logLogSlope(xv, yv);
  return textEl(PLOT.x0 + 12, PLOT.y1 + 18, `slope ${slope.toFixed(3)}`,
                { size: 12, fill: "#333333" });
}

function legend(entries: Array<[string, string]>): string {
  const parts: string[] = [];
  entries.forEach(([label, color], i) => {
    const y = PLOT.y1 + 14 + 16 * i;
    parts.push(lineEl(PLOT.x1 - 150, y - 4, PLOT.x1 - 130, y - 4, color, 2));
    parts.push(textEl(PLOT.x1 - 124, y, label, { size: 10 }));
  });
  return parts.join("\n");
}

// ------------------------------------------------------------------ ladder

function ladderBody(
  spec: FigureSpec, table: Table, warnings: string[],
): string {
  const xcol = spec.xColumn!;
  const ycol = spec.yColumn!;
  requireColumns(table, [xcol, ycol]);
  if (table.rows.length === 0) return emptyAxes(table.path, warnings);

  const rows = [...table.rows].sort((a, b) => a[xcol]! - b[xcol]!);
  const xv = rows.map((r) => r[xcol]!);
  const yv = rows.map((r) => r[ycol]!);
  checkPositive(xv, xcol, "x", spec.axes.x);
  checkPositive(yv, ycol, "y", spec.axes.y);

  const { xs, ys } = scalePair(spec, xv, yv);
  const parts = [axes(xs, ys, xcol, ycol),
                 curve(xs, ys, xv, yv, PALETTE[0])];
  if (spec.axes.x === "log" && spec.axes.y === "log" && xv.length >= 2) {
    parts.push(slopeAnnotation(xv, yv));
  }
  return parts.join("\n");
}

// -------------------------------------------------------- measure distance

function measureBody(
  spec: FigureSpec, table: Table, warnings: string[],
): string {
  requireColumns(table, ["epsilon", "weak_distance_to_base",
                         "split_half_floor"]);
  if (table.rows.length === 0) return emptyAxes(table.path, warnings);

  // the baseline row is the reference point, distance zero by definition
  const rows = [...table.rows]
    .filter((r) => r.weak_distance_to_base! > 0)
    .sort((a, b) => a.epsilon! - b.epsilon!);
  if (rows.length < table.rows.length) {
    warnings.push("baseline row (zero distance) excluded from the ladder");
  }
  if (rows.length === 0) return emptyAxes(table.path, warnings);

  const xv = rows.map((r) => r.epsilon!);
  const dv = rows.map((r) => r.weak_distance_to_base!);
  const fv = rows.map((r) => r.split_half_floor!);
  checkPositive(xv, "epsilon", "x", spec.axes.x);
  checkPositive(dv, "weak_distance_to_base", "y", spec.axes.y);

  const floorOk = spec.axes.y !== "log" || fv.every((v) => v > 0);
  const yAll = floorOk ? dv.concat(fv) : dv;
  const xs = makeScale(spec.axes.x, domain(xv), [PLOT.x0, PLOT.x1]);
  const ys = makeScale(spec.axes.y, domain(yAll), [PLOT.y0, PLOT.y1]);

  const parts = [axes(xs, ys, "epsilon", "weak distance"),
                 curve(xs, ys, xv, dv, PALETTE[0])];
  const entries: Array<[string, string]> = [["distance", PALETTE[0]]];
  if (floorOk) {
    parts.push(curve(xs, ys, xv, fv, PALETTE[6], { dash: "5,4" }));
    entries.push(["split-half floor", PALETTE[6]]);
  } else {
    warnings.push("split-half floor has non-positive values, not drawn");
  }
  parts.push(legend(entries));
  if (spec.axes.x === "log" && spec.axes.y === "log" && xv.length >= 2) {
    parts.push(slopeAnnotation(xv, dv));
  }
  return parts.join("\n");
}

// ------------------------------------------------------------- tail curves

function tailBody(
  spec: FigureSpec, table: Table, warnings: string[],
): string {
  requireColumns(table, ["epsilon", "delta"]);
  const tailCols = table.columns
    .map((c) => ({ c, m: /^tail_j(\d+)$/.exec(c) }))
    .filter((e) => e.m !== null)
    .map((e) => ({ name: e.c, j: Number(e.m![1]) }))
    .sort((a, b) => a.j - b.j);
  if (tailCols.length === 0) {
    throw new DataError(
      `no "tail_j<radius>" columns in ${table.path}; ` +
      "not a tail study table");
  }
  if (table.rows.length === 0) return emptyAxes(table.path, warnings);

  for (const tc of tailCols) {
    checkPositive(column(table, tc.name), tc.name, "y", spec.axes.y);
  }
  const jv = tailCols.map((tc) => tc.j);
  const all = table.rows.flatMap((r) => tailCols.map((tc) => r[tc.name]!));
  const xs = makeScale(spec.axes.x, domain(jv), [PLOT.x0, PLOT.x1]);
  const ys = makeScale(spec.axes.y, domain(all), [PLOT.y0, PLOT.y1]);

  const parts = [axes(xs, ys, "radius j", "sup tail mass")];
  const entries: Array<[string, string]> = [];
  table.rows.forEach((row, i) => {
    const color = PALETTE[i % PALETTE.length]!;
    const yv = tailCols.map((tc) => row[tc.name]!);
    parts.push(curve(xs, ys, jv, yv, color));
    entries.push([`eps=${fmt(row.epsilon!)} delta=${fmt(row.delta!)}`,
                  color]);
  });
  parts.push(legend(entries));
  return parts.join("\n");
}

// ---------------------------------------------------------------- envelope

function envelopeBody(
  spec: FigureSpec, tables: Table[], warnings: string[],
): string {
  if (!spec.envelope) {
    throw new SpecError("envelope figure needs envelope parameters");
  }
  for (const t of tables) requireColumns(t, ["t", "h1_sq"]);
  if (tables.some((t) => t.rows.length === 0)) {
    const empty = tables.find((t) => t.rows.length === 0)!;
    return emptyAxes(empty.path, warnings);
  }

  const tv = column(tables[0]!, "t");
  for (const other of tables.slice(1)) {
    const tv2 = column(other, "t");
    if (tv2.length !== tv.length || tv2.some((v, i) => v !== tv[i])) {
      throw new DataError(
        `t grids differ between ${tables[0]!.path} and ${other.path}`);
    }
  }
  const mean = tv.map((_, i) =>
    tables.reduce((acc, t) => acc + t.rows[i]!.h1_sq!, 0) / tables.length);

  const { m3, u0H1Sq } = spec.envelope;
  const env = tv.map((t) => m3 * (1.0 + Math.exp(-t) * u0H1Sq));
  checkPositive(tv, "t", "x", spec.axes.x);
  checkPositive(mean.concat(env), "h1_sq", "y", spec.axes.y);

  const xs = makeScale(spec.axes.x, domain(tv), [PLOT.x0, PLOT.x1]);
  const ys = makeScale(spec.axes.y, domain(mean.concat(env, [0])),
                       [PLOT.y0, PLOT.y1]);
  const parts = [
    axes(xs, ys, "t", "ensemble mean H1 energy"),
    curve(xs, ys, tv, mean, PALETTE[0]),
    polylineEl(tv.map((t, i) => [xs.map(t), ys.map(env[i]!)]),
               PALETTE[1], { dash: "6,4" }),
    legend([[`mean of ${tables.length} path file(s)`, PALETTE[0]],
            ["M3*(1 + e^-t*|u0|^2)", PALETTE[1]]]),
    textEl(PLOT.x0 + 12, PLOT.y1 + 18, `M3 = ${fmt(m3)}`,
           { size: 12, fill: "#333333" }),
  ];
  return parts.join("\n");
}
