/** Deterministic SVG primitives.
 *
 * Fixed canvas, fixed fonts, fixed palette, and number formatting that
 * depends only on the value, so identical inputs always produce
 * byte-identical files.
 */

export const WIDTH = 640;
export const HEIGHT = 440;
export const MARGIN = { left: 72, right: 24, top: 44, bottom: 56 } as const;

export const PLOT = {
  x0: MARGIN.left,
  x1: WIDTH - MARGIN.right,
  y0: HEIGHT - MARGIN.bottom,     // y grows downward in SVG
  y1: MARGIN.top,
} as const;

export const PALETTE = [
  "#1f77b4", "#d62728", "#2ca02c", "#9467bd",
  "#8c564b", "#e377c2", "#7f7f7f", "#17becf",
] as const;

export type AxisScale = "log" | "linear";

/** Shortest-ish stable decimal: six significant digits, then minimal form. */
export function fmt(v: number): string {
  if (v === 0) return "0";
  return Number(v.toPrecision(6)).toString();
}

const px = (v: number): string => v.toFixed(2);

export interface Scale {
  kind: AxisScale;
  map(v: number): number;
  ticks(): number[];
}

function padDomain(kind: AxisScale, lo: number, hi: number): [number, number] {
  if (lo < hi) return [lo, hi];
  // degenerate domain: widen around the single value
  if (kind === "log") return [lo / 10, lo * 10];
  return [lo - 1, lo + 1];
}

export function makeScale(
  kind: AxisScale,
  domain: [number, number],
  range: [number, number],
): Scale {
  const [lo, hi] = padDomain(kind, domain[0], domain[1]);
  const [r0, r1] = range;
  if (kind === "log") {
    const la = Math.log10(lo);
    const lb = Math.log10(hi);
    return {
      kind,
      map: (v) => r0 + ((Math.log10(v) - la) / (lb - la)) * (r1 - r0),
      ticks: () => {
        const out: number[] = [];
        for (let e = Math.ceil(la - 1e-9); e <= Math.floor(lb + 1e-9); e++) {
          out.push(Math.pow(10, e));
        }
        return out.length >= 2 ? out : [lo, hi];
      },
    };
  }
  return {
    kind,
    map: (v) => r0 + ((v - lo) / (hi - lo)) * (r1 - r0),
    ticks: () => {
      const raw = (hi - lo) / 4;
      const mag = Math.pow(10, Math.floor(Math.log10(raw)));
      const step = [1, 2, 5, 10].map((m) => m * mag)
        .find((s) => s >= raw) ?? 10 * mag;
      const out: number[] = [];
      for (let v = Math.ceil(lo / step) * step; v <= hi + step * 1e-9;
           v += step) {
        out.push(Math.abs(v) < step * 1e-9 ? 0 : v);
      }
      return out;
    },
  };
}

export function textEl(
  x: number, y: number, s: string,
  opts: { anchor?: string; size?: number; fill?: string;
          transform?: string } = {},
): string {
  const anchor = opts.anchor ?? "start";
  const size = opts.size ?? 12;
  const fill = opts.fill ?? "#000000";
  const tr = opts.transform ? ` transform="${opts.transform}"` : "";
  return `<text x="${px(x)}" y="${px(y)}" font-size="${size}" ` +
    `text-anchor="${anchor}" fill="${fill}"${tr}>${escapeXml(s)}</text>`;
}

export function lineEl(
  x1: number, y1: number, x2: number, y2: number,
  stroke = "#000000", width = 1, dash?: string,
): string {
  const d = dash ? ` stroke-dasharray="${dash}"` : "";
  return `<line x1="${px(x1)}" y1="${px(y1)}" x2="${px(x2)}" y2="${px(y2)}" ` +
    `stroke="${stroke}" stroke-width="${width}"${d}/>`;
}

export function polylineEl(
  pts: Array<[number, number]>, stroke: string,
  opts: { dash?: string; width?: number } = {},
): string {
  const d = opts.dash ? ` stroke-dasharray="${opts.dash}"` : "";
  const w = opts.width ?? 1.5;
  const body = pts.map(([x, y]) => `${px(x)},${px(y)}`).join(" ");
  return `<polyline points="${body}" fill="none" stroke="${stroke}" ` +
    `stroke-width="${w}"${d}/>`;
}

export function circleEl(x: number, y: number, r: number,
                         fill: string): string {
  return `<circle cx="${px(x)}" cy="${px(y)}" r="${r}" fill="${fill}"/>`;
}

export function escapeXml(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Frame, tick marks, tick labels and axis titles for both axes. */
export function axes(
  xs: Scale, ys: Scale, xLabel: string, yLabel: string,
): string {
  const parts: string[] = [];
  parts.push(lineEl(PLOT.x0, PLOT.y0, PLOT.x1, PLOT.y0));
  parts.push(lineEl(PLOT.x0, PLOT.y0, PLOT.x0, PLOT.y1));
  for (const t of xs.ticks()) {
    const x = xs.map(t);
    if (x < PLOT.x0 - 0.5 || x > PLOT.x1 + 0.5) continue;
    parts.push(lineEl(x, PLOT.y0, x, PLOT.y0 + 5));
    parts.push(textEl(x, PLOT.y0 + 18, tickLabel(xs.kind, t),
                      { anchor: "middle", size: 10 }));
  }
  for (const t of ys.ticks()) {
    const y = ys.map(t);
    if (y > PLOT.y0 + 0.5 || y < PLOT.y1 - 0.5) continue;
    parts.push(lineEl(PLOT.x0 - 5, y, PLOT.x0, y));
    parts.push(textEl(PLOT.x0 - 8, y + 3, tickLabel(ys.kind, t),
                      { anchor: "end", size: 10 }));
  }
  parts.push(textEl((PLOT.x0 + PLOT.x1) / 2, HEIGHT - 14, xLabel,
                    { anchor: "middle" }));
  parts.push(textEl(16, (PLOT.y0 + PLOT.y1) / 2, yLabel, {
    anchor: "middle",
    transform: `rotate(-90 16 ${px((PLOT.y0 + PLOT.y1) / 2)})`,
  }));
  return parts.join("\n");
}

function tickLabel(kind: AxisScale, v: number): string {
  if (kind === "log") {
    const e = Math.round(Math.log10(v));
    return `1e${e}`;
  }
  return fmt(v);
}

export function document(body: string): string {
  return `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" ` +
    `height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}" ` +
    `font-family="monospace">\n` +
    `<rect width="${WIDTH}" height="${HEIGHT}" fill="#ffffff"/>\n` +
    body + "\n</svg>\n";
}
