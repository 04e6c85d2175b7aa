/** Byte-for-byte golden image regression.
 *
 * Regenerate with UPDATE_GOLDEN=1 npx vitest run test/golden.test.ts
 * after an intentional rendering change, and review the SVG diff.
 */
import { describe, expect, it } from "vitest";

import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { readCsv, type StudyReportLine } from "../src/csv";
import { buildFigure } from "../src/figures";
import type { FigureSpec } from "../src/figspec";
import { renderFigure } from "../src/render";

const HERE = dirname(fileURLToPath(import.meta.url));
const FIX = join(HERE, "fixtures");
const GOLD = join(HERE, "golden");
const UPDATE = process.env.UPDATE_GOLDEN === "1";

interface GoldenCase {
  name: string;
  spec: FigureSpec;
  report?: StudyReportLine;
}

const CASES: GoldenCase[] = [
  {
    name: "ladder.svg",
    spec: {
      kind: "ladder",
      inputs: [join(FIX, "viscosity_points.csv")],
      output: "ladder.svg",
      axes: { x: "log", y: "log" },
      title: "vanishing viscosity",
      xColumn: "delta",
      yColumn: "mean_sup_l2",
    },
    report: { kind: "viscosity", outcome: "pass", verdicts: {} },
  },
  {
    name: "tail.svg",
    spec: {
      kind: "tail_curves",
      inputs: [join(FIX, "tail_points.csv")],
      output: "tail.svg",
      axes: { x: "linear", y: "log" },
      title: "uniform tail decay",
    },
  },
  {
    name: "envelope.svg",
    spec: {
      kind: "envelope",
      inputs: [join(FIX, "diag_p0.csv"), join(FIX, "diag_p1.csv")],
      output: "envelope.svg",
      axes: { x: "linear", y: "linear" },
      title: "dissipativity envelope",
      envelope: { m3: 4.0, u0H1Sq: 5.0 },
    },
  },
  {
    name: "measure.svg",
    spec: {
      kind: "measure_distance",
      inputs: [join(FIX, "measure_points.csv")],
      output: "measure.svg",
      axes: { x: "log", y: "log" },
      title: "invariant measure continuity",
    },
  },
];

describe("golden images", () => {
  for (const c of CASES) {
    it(`matches ${c.name} byte for byte`, () => {
      const tables = c.spec.inputs.map(readCsv);
      const { svg } = buildFigure(c.spec, tables, c.report);
      const goldenPath = join(GOLD, c.name);
      if (UPDATE) writeFileSync(goldenPath, svg, "utf-8");
      expect(svg).toBe(readFileSync(goldenPath, "utf-8"));
    });
  }

  it("renders identically on repeat calls", () => {
    const c = CASES[0]!;
    const tables = c.spec.inputs.map(readCsv);
    const a = buildFigure(c.spec, tables, c.report).svg;
    const b = buildFigure(c.spec, tables, c.report).svg;
    expect(a).toBe(b);
  });

  it("writes through renderFigure without touching the inputs", () => {
    const dir = mkdtempSync(join(tmpdir(), "llbfig-golden-"));
    const input = join(FIX, "viscosity_points.csv");
    const before = readFileSync(input);
    const spec: FigureSpec = {
      ...CASES[0]!.spec,
      output: join(dir, "nested", "ladder.svg"),
      report: join(FIX, "viscosity_report.jsonl"),
    };
    const res1 = renderFigure(spec);
    const res2 = renderFigure(spec);
    expect(res1.output).toBe(spec.output);
    const written = readFileSync(spec.output, "utf-8");
    expect(written).toBe(readFileSync(join(GOLD, "ladder.svg"), "utf-8"));
    expect(res2.warnings).toEqual(res1.warnings);
    expect(readFileSync(input).equals(before)).toBe(true);
  });
});
