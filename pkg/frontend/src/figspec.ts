/** Figure specification: a small JSON file naming inputs and a kind.
 *
 * {
 *   "kind": "ladder",
 *   "inputs": ["out/visc/points.csv"],
 *   "output": "figs/viscosity.svg",
 *   "x_column": "delta",
 *   "y_column": "mean_sup_l2",
 *   "axes": {"x": "log", "y": "log"},
 *   "title": "vanishing viscosity",
 *   "report": "out/visc/report.jsonl"
 * }
 *
 * Relative input/output paths resolve against the directory holding the
 * spec file, so a spec can ship next to its data.
 */

import { readFileSync } from "node:fs";
import { dirname, resolve } from "node:path";

import { SpecError } from "./errors.js";
import type { AxisScale } from "./svg.js";

export const FIGURE_KINDS =
  ["ladder", "tail_curves", "envelope", "measure_distance"] as const;
export type FigureKind = (typeof FIGURE_KINDS)[number];

export interface FigureSpec {
  kind: FigureKind;
  inputs: string[];
  output: string;
  axes: { x: AxisScale; y: AxisScale };
  title: string;
  xColumn?: string;
  yColumn?: string;
  envelope?: { m3: number; u0H1Sq: number };
  report?: string;
}

const AXIS_DEFAULTS: Record<FigureKind, { x: AxisScale; y: AxisScale }> = {
  ladder: { x: "log", y: "log" },
  tail_curves: { x: "linear", y: "log" },
  envelope: { x: "linear", y: "linear" },
  measure_distance: { x: "log", y: "log" },
};

function asAxis(v: unknown, name: string): AxisScale {
  if (v !== "log" && v !== "linear") {
    throw new SpecError(`axis scale for ${name} must be "log" or "linear"`);
  }
  return v;
}

export function parseFigureSpec(text: string, specPath: string): FigureSpec {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch {
    throw new SpecError(`${specPath}: not valid JSON`);
  }
  if (typeof raw !== "object" || raw === null || Array.isArray(raw)) {
    throw new SpecError(`${specPath}: spec must be a JSON object`);
  }
  const obj = raw as Record<string, unknown>;
  const known = new Set(["kind", "inputs", "output", "axes", "title",
                         "x_column", "y_column", "envelope", "report"]);
  for (const key of Object.keys(obj)) {
    if (!known.has(key)) throw new SpecError(`unknown spec key "${key}"`);
  }

  const kind = obj.kind;
  if (typeof kind !== "string" ||
      !FIGURE_KINDS.includes(kind as FigureKind)) {
    throw new SpecError(
      `unknown figure kind ${JSON.stringify(kind)}; ` +
      `expected one of ${FIGURE_KINDS.join(", ")}`);
  }

  const base = dirname(resolve(specPath));
  const inputs = obj.inputs;
  if (!Array.isArray(inputs) || inputs.length === 0 ||
      !inputs.every((p) => typeof p === "string")) {
    throw new SpecError("inputs must be a non-empty list of paths");
  }
  if (kind !== "envelope" && inputs.length !== 1) {
    throw new SpecError(`figure kind "${kind}" takes exactly one input`);
  }

  const output = obj.output;
  if (typeof output !== "string" || !output.endsWith(".svg")) {
    throw new SpecError('output must be a path ending in ".svg"');
  }

  const defaults = AXIS_DEFAULTS[kind as FigureKind];
  let axes = { ...defaults };
  if (obj.axes !== undefined) {
    if (typeof obj.axes !== "object" || obj.axes === null) {
      throw new SpecError("axes must be an object with x/y scales");
    }
    const a = obj.axes as Record<string, unknown>;
    for (const key of Object.keys(a)) {
      if (key !== "x" && key !== "y") {
        throw new SpecError(`unknown axes key "${key}"`);
      }
    }
    axes = {
      x: a.x === undefined ? defaults.x : asAxis(a.x, "x"),
      y: a.y === undefined ? defaults.y : asAxis(a.y, "y"),
    };
  }

  const spec: FigureSpec = {
    kind: kind as FigureKind,
    inputs: (inputs as string[]).map((p) => resolve(base, p)),
    output: resolve(base, output),
    axes,
    title: typeof obj.title === "string" ? obj.title : kind,
  };

  if (obj.x_column !== undefined) {
    if (typeof obj.x_column !== "string") {
      throw new SpecError("x_column must be a string");
    }
    spec.xColumn = obj.x_column;
  }
  if (obj.y_column !== undefined) {
    if (typeof obj.y_column !== "string") {
      throw new SpecError("y_column must be a string");
    }
    spec.yColumn = obj.y_column;
  }
  if (spec.kind === "ladder" && (!spec.xColumn || !spec.yColumn)) {
    throw new SpecError('figure kind "ladder" needs x_column and y_column');
  }

  if (spec.kind === "envelope") {
    const env = obj.envelope;
    if (typeof env !== "object" || env === null) {
      throw new SpecError(
        'figure kind "envelope" needs an envelope table ' +
        '{"m3": number, "u0_h1_sq": number}');
    }
    const e = env as Record<string, unknown>;
    const m3 = e.m3;
    const u0 = e.u0_h1_sq;
    if (typeof m3 !== "number" || !(m3 > 0) ||
        typeof u0 !== "number" || !(u0 >= 0)) {
      throw new SpecError("envelope needs m3 > 0 and u0_h1_sq >= 0");
    }
    spec.envelope = { m3, u0H1Sq: u0 };
  } else if (obj.envelope !== undefined) {
    throw new SpecError(`figure kind "${kind}" does not take an envelope`);
  }

  if (obj.report !== undefined) {
    if (typeof obj.report !== "string") {
      throw new SpecError("report must be a path");
    }
    spec.report = resolve(base, obj.report);
  }
  return spec;
}

export function loadFigureSpec(path: string): FigureSpec {
  return parseFigureSpec(readFileSync(path, "utf-8"), path);
}
