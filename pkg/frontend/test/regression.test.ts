import { describe, expect, it } from "vitest";

import { leastSquares, logLogSlope } from "../src/regression";

describe("leastSquares", () => {
  it("recovers an exact line", () => {
    const xs = [0, 1, 2, 3];
    const ys = xs.map((x) => 2.5 * x - 1.25);
    const fit = leastSquares(xs, ys);
    expect(fit.slope).toBeCloseTo(2.5, 12);
    expect(fit.intercept).toBeCloseTo(-1.25, 12);
  });

  it("matches an independently written normal-equations fit", () => {
    // hand data with scatter; reference fit computed with plain sums
    const xs = [0.1, 0.35, 0.7, 1.1, 1.6];
    const ys = [0.9, 1.4, 2.3, 3.0, 4.2];
    const n = xs.length;
    let sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (let i = 0; i < n; i++) {
      sx += xs[i]!;
      sy += ys[i]!;
      sxx += xs[i]! * xs[i]!;
      sxy += xs[i]! * ys[i]!;
    }
    const ref = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const fit = leastSquares(xs, ys);
    expect(fit.slope).toBeCloseTo(ref, 12);
  });

  it("rejects mismatched or short input", () => {
    expect(() => leastSquares([1], [1]))
      .toThrowError(/two matched samples/);
    expect(() => leastSquares([1, 2], [1]))
      .toThrowError(/two matched samples/);
    expect(() => leastSquares([1, 1], [0, 1]))
      .toThrowError(/distinct x values/);
  });
});

describe("logLogSlope", () => {
  it("gives exactly 1 on the canonical two-point ladder", () => {
    // decade steps on both axes; log10 is exact on powers of ten
    const slope = logLogSlope([1e-1, 1e-2], [1e-2, 1e-3]);
    expect(slope).toBe(1);
    expect(slope.toFixed(3)).toBe("1.000");
  });

  it("recovers a power law", () => {
    const xs = [1e-1, 1e-2, 1e-3, 1e-4];
    const ys = xs.map((x) => 3.7 * Math.pow(x, 2.5));
    expect(logLogSlope(xs, ys)).toBeCloseTo(2.5, 10);
  });

  it("rejects nonpositive values", () => {
    expect(() => logLogSlope([1, 0.1], [1, 0])).toThrowError(/positive/);
    expect(() => logLogSlope([-1, 0.1], [1, 2])).toThrowError(/positive/);
  });
});
