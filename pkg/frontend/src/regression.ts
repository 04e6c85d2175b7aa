/** Ordinary least squares, the only statistics a figure needs. */

export interface Fit {
  slope: number;
  intercept: number;
}

export function leastSquares(xs: number[], ys: number[]): Fit {
  if (xs.length !== ys.length || xs.length < 2) {
    throw new Error(`least squares needs two matched samples, got ${xs.length}`);
  }
  const n = xs.length;
  const mx = xs.reduce((a, b) => a + b, 0) / n;
  const my = ys.reduce((a, b) => a + b, 0) / n;
  let sxx = 0;
  let sxy = 0;
  for (let i = 0; i < n; i++) {
    const dx = xs[i]! - mx;
    sxx += dx * dx;
    sxy += dx * (ys[i]! - my);
  }
  if (sxx === 0) {
    throw new Error("least squares needs at least two distinct x values");
  }
  const slope = sxy / sxx;
  return { slope, intercept: my - slope * mx };
}

/** Slope of log10(y) against log10(x); inputs must be positive. */
export function logLogSlope(xs: number[], ys: number[]): number {
  // catch nonpositive data here too, or the fit silently returns NaN
  if (xs.some((v) => !(v > 0)) || ys.some((v) => !(v > 0))) {
    throw new Error("log-log slope needs positive data");
  }
  return leastSquares(xs.map(Math.log10), ys.map(Math.log10)).slope;
}
